#include "fhvs/geography.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <stdexcept>

#include "fhvs/rng.hpp"

namespace fhvs::frame {

std::vector<int> Geography::areas_of_admin1(int a) const {
    std::vector<int> out;
    for (int i = 0; i < n_areas; ++i)
        if (admin1_of_area[i] == a) out.push_back(i);
    return out;
}

Geography build_geography(int n_areas, int n_admin1, int n_urban_only, std::uint64_t seed) {
    if (n_admin1 < 1 || n_areas < n_admin1)
        throw std::invalid_argument("build_geography: need K >= A >= 1");
    if (n_areas < 2)
        throw std::invalid_argument("build_geography: single-area graph cannot support ICAR scaling");
    if (n_urban_only < 0 || n_urban_only > n_admin1)
        throw std::invalid_argument("build_geography: bad urban-only count");

    Geography g;
    g.n_areas = n_areas;
    g.n_admin1 = n_admin1;

    // lattice adjacency, row-major
    const int width = static_cast<int>(std::ceil(std::sqrt(static_cast<double>(n_areas))));
    g.adjacency.assign(n_areas, {});
    for (int k = 0; k < n_areas; ++k) {
        const int r = k / width, c = k % width;
        if (c + 1 < width && k + 1 < n_areas) {
            g.adjacency[k].push_back(k + 1);
            g.adjacency[k + 1].push_back(k);
        }
        if ((r + 1) * width + c < n_areas) {
            g.adjacency[k].push_back(k + width);
            g.adjacency[k + width].push_back(k);
        }
    }

    // contiguous admin1 blocks, sizes as even as possible
    g.admin1_of_area.resize(n_areas);
    const int base = n_areas / n_admin1, extra = n_areas % n_admin1;
    int pos = 0;
    for (int a = 0; a < n_admin1; ++a) {
        const int len = base + (a < extra ? 1 : 0);
        for (int j = 0; j < len; ++j) g.admin1_of_area[pos++] = a;
    }

    // seeded choice of urban-only admin1 groups
    std::vector<char> urban_only(n_admin1, 0);
    {
        Rng rng(derive_seed(seed, {0x6765u}));
        std::vector<int> ids(n_admin1);
        std::iota(ids.begin(), ids.end(), 0);
        for (int t = 0; t < n_urban_only; ++t) {
            const auto j = t + static_cast<int>(rng.below(n_admin1 - t));
            std::swap(ids[t], ids[j]);
            urban_only[ids[t]] = 1;
        }
    }

    g.urban_stratum_of_admin1.assign(n_admin1, -1);
    g.rural_stratum_of_admin1.assign(n_admin1, -1);
    for (int a = 0; a < n_admin1; ++a) {
        g.urban_stratum_of_admin1[a] = static_cast<int>(g.strata.size());
        g.strata.push_back({a, true});
        if (!urban_only[a]) {
            g.rural_stratum_of_admin1[a] = static_cast<int>(g.strata.size());
            g.strata.push_back({a, false});
        }
    }
    return g;
}

}  // namespace fhvs::frame
