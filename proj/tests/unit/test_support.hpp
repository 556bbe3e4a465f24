#pragma once

#include <filesystem>
#include <string>

#include <gtest/gtest.h>

#include "zeroclust/matrix.hpp"
#include "zeroclust/rng.hpp"

namespace testing_support {

inline zeroclust::Matrix random_matrix(std::size_t n, std::size_t d, std::uint64_t seed, double scale = 1.0) {
    zeroclust::Rng rng(seed);
    zeroclust::Matrix m(n, d);
    for (auto& v : m.values()) v = scale * rng.normal();
    return m;
}

/// A fresh empty directory under the system temp dir, named after the test.
inline std::filesystem::path temp_dir() {
    const auto* info = ::testing::UnitTest::GetInstance()->current_test_info();
    auto dir = std::filesystem::temp_directory_path() / "zeroclust_tests" /
               (std::string(info->test_suite_name()) + "." + info->name());
    std::filesystem::remove_all(dir);
    std::filesystem::create_directories(dir);
    return dir;
}

}  // namespace testing_support
