#pragma once

#include <cstdint>
#include <vector>

namespace fhvs::frame {

struct Stratum {
    int admin1;
    bool urban;
};

// Synthetic geography: K areas on a connected lattice, partitioned into A
// contiguous admin1 groups. Each admin1 contributes an urban stratum and,
// unless it is one of the urban-only groups, a rural stratum.
struct Geography {
    int n_areas = 0;
    int n_admin1 = 0;
    std::vector<int> admin1_of_area;          // size K
    std::vector<std::vector<int>> adjacency;  // symmetric neighbor lists
    std::vector<Stratum> strata;              // stratum id -> (admin1, urban)
    std::vector<int> urban_stratum_of_admin1;
    std::vector<int> rural_stratum_of_admin1;  // -1 for urban-only admin1

    int n_strata() const { return static_cast<int>(strata.size()); }
    std::vector<int> areas_of_admin1(int a) const;
};

Geography build_geography(int n_areas, int n_admin1, int n_urban_only, std::uint64_t seed);

}  // namespace fhvs::frame
