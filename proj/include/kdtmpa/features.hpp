#pragma once

// State features for the classifier, computed for the engineer about to act.
//
//   f1: per location m the block (x_m, n_av, n_ua, t_nu, t_theta1, t_theta2, xi)
//       followed by the total number of available engineers; 7M+1 entries.
//   f2: f1 without the final total; 7M entries.
//   f3: levels, then (location, maintaining, remaining) per engineer, then
//       the acting engineer's index; M+3K+1 entries. Locations and the
//       engineer index are 1-based.

#include "kdtmpa/mdp.hpp"

#include <array>
#include <cmath>
#include <limits>
#include <string>
#include <utility>

namespace kdtmpa {

enum class FeatureDesign : std::uint32_t { F1 = 1, F2 = 2, F3 = 3 };

inline std::string to_string(FeatureDesign d) { return "f" + std::to_string(static_cast<unsigned>(d)); }

inline FeatureDesign parse_feature_design(const std::string& s) {
    if (s == "f1") return FeatureDesign::F1;
    if (s == "f2") return FeatureDesign::F2;
    if (s == "f3") return FeatureDesign::F3;
    throw ValidationError("unknown feature design '" + s + "' (expected f1, f2 or f3)");
}

inline std::size_t feature_dimension(FeatureDesign d, int M, int K) {
    switch (d) {
    case FeatureDesign::F1: return static_cast<std::size_t>(7 * M + 1);
    case FeatureDesign::F2: return static_cast<std::size_t>(7 * M);
    case FeatureDesign::F3: return static_cast<std::size_t>(M + 3 * K + 1);
    }
    throw ValidationError("unknown feature design");
}

/// Writes the features of `s` for acting engineer k into out[0 .. dim).
template <class T>
void featurize(FeatureDesign d, const NetworkState& s, int k, T* out) {
    const int M = static_cast<int>(s.levels.size());
    if (d == FeatureDesign::F3) {
        std::size_t i = 0;
        for (int m = 0; m < M; ++m) out[i++] = static_cast<T>(s.levels[m]);
        for (const auto& e : s.engineers) {
            out[i++] = static_cast<T>(e.location + 1);
            out[i++] = static_cast<T>(e.maintaining ? 1 : 0);
            out[i++] = static_cast<T>(e.remaining);
        }
        out[i] = static_cast<T>(k + 1);
        return;
    }
    constexpr int none = std::numeric_limits<int>::max();
    for (int m = 0; m < M; ++m) {
        T* b = out + 7 * m;
        b[0] = static_cast<T>(s.levels[m]);
        for (int j = 1; j < 7; ++j) b[j] = T(0);
    }
    // Two smallest travel remainders per location, tracked in place.
    thread_local std::vector<std::array<int, 2>> theta;
    theta.assign(static_cast<std::size_t>(M), {none, none});
    int available = 0;
    for (const auto& e : s.engineers) {
        T* b = out + 7 * e.location;
        if (e.remaining == 0) {
            b[1] += T(1);
            ++available;
            continue;
        }
        b[2] += T(1);
        if (e.maintaining) {
            b[3] = static_cast<T>(e.remaining);
        } else {
            auto& t = theta[static_cast<std::size_t>(e.location)];
            if (e.remaining < t[0]) {
                t[1] = t[0];
                t[0] = e.remaining;
            } else if (e.remaining < t[1]) {
                t[1] = e.remaining;
            }
        }
    }
    for (int m = 0; m < M; ++m) {
        const auto& t = theta[static_cast<std::size_t>(m)];
        out[7 * m + 4] = static_cast<T>(t[0] == none ? 0 : t[0]);
        out[7 * m + 5] = static_cast<T>(t[1] == none ? 0 : t[1]);
    }
    out[7 * s.engineers[k].location + 6] = T(1);
    if (d == FeatureDesign::F1) out[7 * M] = static_cast<T>(available);
}

template <class T>
void featurize(FeatureDesign d, const Instance&, const NetworkState& s, int k, T* out) {
    featurize(d, s, k, out);
}

inline std::vector<double> featurize(FeatureDesign d, const Instance& inst, const NetworkState& s, int k) {
    std::vector<double> v(feature_dimension(d, inst.machine_count(), static_cast<int>(s.engineers.size())));
    featurize(d, s, k, v.data());
    return v;
}

/// Inverse of the f3 layout: the state and acting engineer encoded in v.
template <class T>
std::pair<NetworkState, int> state_from_f3(const T* v, int M, int K) {
    NetworkState s;
    s.levels.resize(static_cast<std::size_t>(M));
    for (int m = 0; m < M; ++m) s.levels[m] = static_cast<int>(std::lround(v[m]));
    s.engineers.resize(static_cast<std::size_t>(K));
    for (int k = 0; k < K; ++k) {
        const T* e = v + M + 3 * k;
        s.engineers[k] = {static_cast<int>(std::lround(e[0])) - 1, std::lround(e[1]) != 0, static_cast<int>(std::lround(e[2]))};
    }
    return {std::move(s), static_cast<int>(std::lround(v[M + 3 * K])) - 1};
}

} // namespace kdtmpa
