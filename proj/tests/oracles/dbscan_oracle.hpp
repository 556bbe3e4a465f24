#pragma once

// Textbook DBSCAN over an explicit N x N neighborhood. Clusters are grown
// from unvisited core points in index order; a border point joins the
// lowest-numbered cluster owning a core point within eps.

#include <cstdint>
#include <deque>
#include <vector>

namespace oracle {

inline std::vector<std::int32_t> dbscan(const std::vector<std::vector<double>>& pts, double eps, std::size_t min_samples) {
    const std::size_t n = pts.size();
    std::vector<std::vector<bool>> near(n, std::vector<bool>(n, false));
    for (std::size_t i = 0; i < n; ++i) {
        for (std::size_t j = 0; j < n; ++j) {
            double d = 0.0;
            for (std::size_t c = 0; c < pts[i].size(); ++c) d += (pts[i][c] - pts[j][c]) * (pts[i][c] - pts[j][c]);
            near[i][j] = d <= eps * eps;
        }
    }
    std::vector<bool> core(n, false);
    for (std::size_t i = 0; i < n; ++i) {
        std::size_t count = 0;
        for (std::size_t j = 0; j < n; ++j) count += near[i][j];
        core[i] = count >= min_samples;
    }
    std::vector<std::int32_t> label(n, -1);
    std::int32_t next = 0;
    for (std::size_t s = 0; s < n; ++s) {
        if (!core[s] || label[s] >= 0) continue;
        std::deque<std::size_t> queue{s};
        label[s] = next;
        while (!queue.empty()) {
            const std::size_t p = queue.front();
            queue.pop_front();
            for (std::size_t q = 0; q < n; ++q) {
                if (core[q] && near[p][q] && label[q] < 0) {
                    label[q] = next;
                    queue.push_back(q);
                }
            }
        }
        ++next;
    }
    for (std::size_t i = 0; i < n; ++i) {
        if (core[i]) continue;
        for (std::size_t j = 0; j < n; ++j) {
            if (core[j] && near[i][j] && (label[i] < 0 || label[j] < label[i])) label[i] = label[j];
        }
    }
    return label;
}

}  // namespace oracle
