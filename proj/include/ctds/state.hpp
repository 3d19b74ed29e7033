#ifndef CTDS_STATE_HPP
#define CTDS_STATE_HPP

#include "ctds/common.hpp"

namespace ctds {

// One particle's augmented snapshot. xi/pxi are used by continuum schemes,
// px by inertial ones; work accumulates the Jarzynski log-weight A_t.
struct AugmentedState {
    Vec x;
    double xi = 0.0;
    Vec px;
    double pxi = 0.0;
    double t = 0.0;
    double work = 0.0;

    bool finite() const {
        return x.allFinite() && std::isfinite(xi) && (px.size() == 0 || px.allFinite()) &&
               std::isfinite(pxi) && std::isfinite(work);
    }
};

}  // namespace ctds

#endif  // CTDS_STATE_HPP
