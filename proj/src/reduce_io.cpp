#include "json_util.hpp"
#include "zeroclust/embank.hpp"
#include "zeroclust/error.hpp"
#include "zeroclust/reduce.hpp"

namespace zeroclust {

namespace fs = std::filesystem;

namespace {
constexpr char kCoordsFile[] = "coords.zseb";
constexpr char kRecipeFile[] = "recipe.json";
}  // namespace

void write_reduced_space(const ReducedSpace& space, const fs::path& dir) {
    fs::create_directories(dir);
    write_zseb(bank_from_matrix(space.coords, to_string(space.recipe.method)), dir / kCoordsFile);
    detail::json j;
    j["recipe"] = detail::to_json(space.recipe);
    j["n_rows"] = space.coords.rows();
    j["dim"] = space.coords.cols();
    j["diagnostics"] = detail::to_json(space.diagnostics);
    detail::write_json_file(j, dir / kRecipeFile);
}

ReducedSpace read_reduced_space(const fs::path& dir) {
    ReducedSpace space;
    space.coords = read_zseb(dir / kCoordsFile).to_matrix();
    const auto j = detail::read_json_file(dir / kRecipeFile);
    space.recipe = detail::recipe_from_json(j.at("recipe"));
    if (j.contains("diagnostics")) space.diagnostics = detail::diagnostics_from_json(j["diagnostics"]);
    if (j.value("n_rows", space.coords.rows()) != space.coords.rows() ||
        j.value("dim", space.coords.cols()) != space.coords.cols()) {
        throw ValidationError(dir.string() + ": recipe shape does not match coordinates");
    }
    return space;
}

}  // namespace zeroclust
