#include "cusp/timechange.hpp"

#include <algorithm>

namespace cusp {

namespace {

// Segment k with u[k] <= v <= u[k+1] and the linear weight inside it.
std::pair<std::size_t, double> locate(const std::vector<double>& u, double v)
{
    require(!u.empty(), "empty time-changed path");
    if (u.size() == 1 || v <= u.front()) {
        return {0, 0.0};
    }
    if (v >= u.back()) {
        return {u.size() - 2, 1.0};
    }
    const auto it = std::upper_bound(u.begin(), u.end(), v);
    const auto k = static_cast<std::size_t>(it - u.begin() - 1);
    const double span = u[k + 1] - u[k];
    return {k, span > 0.0 ? (v - u[k]) / span : 0.0};
}

template <class T>
T lerp_at(const std::vector<double>& u, const std::vector<T>& f, double v)
{
    const auto [k, w] = locate(u, v);
    if (u.size() == 1 || w == 0.0) {
        return f[k];
    }
    if (w == 1.0) {
        return f[k + 1];
    }
    return T((1.0 - w) * f[k] + w * f[k + 1]);
}

}  // namespace

double TimeChangedPath::h0_at(double v) const { return lerp_at(u, h0, v); }

double TimeChangedPath::h1_at(double v) const { return lerp_at(u, h1, v); }

Vec2 TimeChangedPath::y_at(double v) const { return lerp_at(u, y_states, v); }

double TimeChangedPath::h0_inverse(double t) const
{
    require(!h0.empty(), "empty time-changed path");
    require(t >= h0.front() && t <= h0.back(), "time outside the stretched range");
    // first breakpoint with h0 >= t
    const auto it = std::lower_bound(h0.begin(), h0.end(), t);
    const auto k = static_cast<std::size_t>(it - h0.begin());
    if (h0[k] == t) {
        return u[k];
    }
    const double w = (t - h0[k - 1]) / (h0[k] - h0[k - 1]);
    return u[k - 1] + w * (u[k] - u[k - 1]);
}

TimeChangedPath stretch(const PathRecord& p)
{
    const std::size_t n = p.times.size();
    require(n >= 1 && p.states.size() == n && p.local_time.size() == n, "path record columns must agree");
    TimeChangedPath tc;
    tc.u.resize(n);
    tc.h0 = p.times;
    tc.h1 = p.local_time;
    tc.y_states = p.states;
    tc.directions = p.push_directions;
    tc.directions.resize(n);
    for (std::size_t k = 0; k < n; ++k) {
        require(k == 0 || (p.local_time[k] >= p.local_time[k - 1] && p.times[k] >= p.times[k - 1]),
                "local time and time must be nondecreasing");
        tc.u[k] = p.times[k] + p.local_time[k];
    }
    return tc;
}

ClockPath unstretch(const TimeChangedPath& tc)
{
    const std::size_t n = tc.u.size();
    require(n >= 1 && tc.h0.size() == n && tc.h1.size() == n && tc.y_states.size() == n,
            "time-changed path columns must agree");
    for (std::size_t k = 1; k < n; ++k) {
        if (tc.u[k] > tc.u[k - 1] && !(tc.h0[k] > tc.h0[k - 1])) {
            throw Error(ErrorKind::not_invertible,
                        "h0 is flat on [" + std::to_string(tc.u[k - 1]) + ", " + std::to_string(tc.u[k]) + "]");
        }
    }
    ClockPath out;
    out.times.reserve(n);
    out.states.reserve(n);
    out.local_time.reserve(n);
    for (std::size_t k = 0; k < n; ++k) {
        const double t = tc.h0[k];
        const double v = tc.h0_inverse(t);
        out.times.push_back(t);
        out.states.push_back(tc.y_at(v));
        out.local_time.push_back(tc.h1_at(v));
    }
    return out;
}

double max_flat_length(const TimeChangedPath& tc)
{
    double longest = 0.0;
    std::size_t start = 0;
    for (std::size_t k = 1; k <= tc.u.size(); ++k) {
        if (k == tc.u.size() || tc.h0[k] != tc.h0[start]) {
            longest = std::max(longest, tc.u[k - 1] - tc.u[start]);
            start = k;
        }
    }
    return longest;
}

}  // namespace cusp
