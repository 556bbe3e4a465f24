#pragma once

#include <map>
#include <string>
#include <vector>

namespace zeroclust {

/// Free-form run diagnostics: named scalars, named series and notes.
struct Diagnostics {
    std::map<std::string, double> scalars;
    std::map<std::string, std::vector<double>> series;
    std::vector<std::string> notes;

    bool empty() const { return scalars.empty() && series.empty() && notes.empty(); }
};

}  // namespace zeroclust
