#pragma once

// Trained classifier networks: file format and the sequential decision rule.
//
// File layout (little-endian):
//   "KDTMPANN" | u32 version | u32 design | u32 M | u32 K | u64 instance hash
//   | u32 generation | u32 input dim | u32 L | L x u32 hidden widths
//   | u32 output dim | per layer: f32 weights (row-major, out x in), f32 biases

#include "kdtmpa/features.hpp"
#include "kdtmpa/mlp.hpp"
#include "kdtmpa/policy.hpp"

#include <cstring>
#include <fstream>
#include <memory>

namespace kdtmpa {

struct TrainedNetwork {
    Mlp net;
    FeatureDesign design = FeatureDesign::F1;
    int M = 0;
    int K = 0;
    std::uint64_t instance_hash = 0;
    std::uint32_t generation = 0;

    bool operator==(const TrainedNetwork&) const = default;
};

namespace detail {
inline constexpr char network_magic[8] = {'K', 'D', 'T', 'M', 'P', 'A', 'N', 'N'};
inline constexpr std::uint32_t network_version = 1;

template <class T>
void put(std::ostream& os, T v) {
    os.write(reinterpret_cast<const char*>(&v), sizeof v);
}

template <class T>
T get(std::istream& is, const std::string& what) {
    T v{};
    if (!is.read(reinterpret_cast<char*>(&v), sizeof v)) throw ValidationError(what + ": truncated file");
    return v;
}
} // namespace detail

inline void save_network(const std::string& path, const TrainedNetwork& tn) {
    std::ofstream os(path, std::ios::binary);
    if (!os) throw ValidationError("cannot write network file " + path);
    os.write(detail::network_magic, 8);
    detail::put<std::uint32_t>(os, detail::network_version);
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(tn.design));
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(tn.M));
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(tn.K));
    detail::put<std::uint64_t>(os, tn.instance_hash);
    detail::put<std::uint32_t>(os, tn.generation);
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(tn.net.input_dim()));
    const auto hidden = tn.net.hidden_widths();
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(hidden.size()));
    for (int w : hidden) detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(w));
    detail::put<std::uint32_t>(os, static_cast<std::uint32_t>(tn.net.output_dim()));
    for (std::size_t l = 0; l < tn.net.layer_count(); ++l) {
        const auto& W = tn.net.weights()[l];
        for (Eigen::Index r = 0; r < W.rows(); ++r)
            for (Eigen::Index c = 0; c < W.cols(); ++c) detail::put<float>(os, static_cast<float>(W(r, c)));
        for (Eigen::Index r = 0; r < tn.net.biases()[l].size(); ++r)
            detail::put<float>(os, static_cast<float>(tn.net.biases()[l](r)));
    }
    if (!os) throw ValidationError("error writing network file " + path);
}

inline TrainedNetwork load_network(const std::string& path) {
    std::ifstream is(path, std::ios::binary);
    if (!is) throw ValidationError("cannot open network file " + path);
    const std::string what = "network " + path;
    char magic[8];
    if (!is.read(magic, 8) || std::memcmp(magic, detail::network_magic, 8) != 0)
        throw ValidationError(what + ": not a network file");
    if (detail::get<std::uint32_t>(is, what) != detail::network_version)
        throw ValidationError(what + ": unsupported version");
    TrainedNetwork tn;
    const auto design = detail::get<std::uint32_t>(is, what);
    if (design < 1 || design > 3) throw ValidationError(what + ": unknown feature design");
    tn.design = static_cast<FeatureDesign>(design);
    tn.M = static_cast<int>(detail::get<std::uint32_t>(is, what));
    tn.K = static_cast<int>(detail::get<std::uint32_t>(is, what));
    tn.instance_hash = detail::get<std::uint64_t>(is, what);
    tn.generation = detail::get<std::uint32_t>(is, what);
    const auto in = detail::get<std::uint32_t>(is, what);
    const auto L = detail::get<std::uint32_t>(is, what);
    if (L > 64) throw ValidationError(what + ": implausible layer count");
    std::vector<int> dims{static_cast<int>(in)};
    for (std::uint32_t l = 0; l < L; ++l) dims.push_back(static_cast<int>(detail::get<std::uint32_t>(is, what)));
    dims.push_back(static_cast<int>(detail::get<std::uint32_t>(is, what)));
    for (int d : dims)
        if (d < 1 || d > (1 << 20)) throw ValidationError(what + ": implausible layer width");
    if (static_cast<std::size_t>(in) != feature_dimension(tn.design, tn.M, tn.K))
        throw ValidationError(what + ": input dimension does not match the feature design");
    if (dims.back() != tn.M + 1) throw ValidationError(what + ": output dimension must be M+1");
    std::vector<Eigen::MatrixXd> W;
    std::vector<Eigen::VectorXd> b;
    for (std::size_t l = 0; l + 1 < dims.size(); ++l) {
        Eigen::MatrixXd w(dims[l + 1], dims[l]);
        for (Eigen::Index r = 0; r < w.rows(); ++r)
            for (Eigen::Index c = 0; c < w.cols(); ++c) w(r, c) = detail::get<float>(is, what);
        Eigen::VectorXd v(dims[l + 1]);
        for (Eigen::Index r = 0; r < v.size(); ++r) v(r) = detail::get<float>(is, what);
        W.push_back(std::move(w));
        b.push_back(std::move(v));
    }
    if (is.peek() != std::char_traits<char>::eof()) throw ValidationError(what + ": trailing bytes");
    tn.net = Mlp(std::move(W), std::move(b));
    return tn;
}

/// Checks that `tn` can drive `inst`. f1/f2 networks do not depend on K.
inline void check_network_compatible(const TrainedNetwork& tn, const Instance& inst) {
    if (tn.M != inst.machine_count())
        throw ValidationError("network was trained for " + std::to_string(tn.M) + " machines, instance has " +
                              std::to_string(inst.machine_count()));
    if (tn.design == FeatureDesign::F3 && tn.K != inst.engineer_count())
        throw ValidationError("f3 network was trained for a different number of engineers");
}

/// Engineers act in ascending order; each one picks the highest-scoring
/// legal ordinal for the state left by the engineers before it.
class NetworkPolicy final : public Policy {
public:
    NetworkPolicy(std::shared_ptr<const TrainedNetwork> net, std::string label)
        : net_(std::move(net)), label_(std::move(label)) {}

    std::string id() const override { return "net:" + label_; }
    const TrainedNetwork& network() const { return *net_; }

    void decide(const Instance& inst, const NetworkState& s, Rng&, JointAction& out) const override {
        const int M = inst.machine_count();
        const int K = static_cast<int>(s.engineers.size());
        thread_local NetworkState work;
        thread_local std::vector<double> x;
        thread_local Eigen::VectorXd logits;
        work = s;
        x.resize(feature_dimension(net_->design, M, K));
        out.resize(static_cast<std::size_t>(K));
        for (int k = 0; k < K; ++k) {
            const auto& e = work.engineers[k];
            if (!e.available()) {
                out[k] = EngineerAction::travel_to(e.location);
                continue;
            }
            featurize(net_->design, work, k, x.data());
            net_->net.forward(x.data(), logits);
            const int last = detail::other_maintains_at(work, k, e.location) ? M - 1 : M;
            int best = 0;
            for (int o = 1; o <= last; ++o)
                if (logits(o) > logits(best)) best = o;
            out[k] = EngineerAction::from_ordinal(best, M);
            apply_engineer_action_unchecked(inst, work, k, out[k]);
        }
    }

    std::vector<WeightedAction> distribution(const Instance& inst, const NetworkState& s) const override {
        Rng unused;
        return {{choose(inst, s, unused), 1.0}};
    }

private:
    std::shared_ptr<const TrainedNetwork> net_;
    std::string label_;
};

} // namespace kdtmpa
