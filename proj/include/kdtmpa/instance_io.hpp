#pragma once

// JSON instance files. Degradation matrices are named and given in full;
// entries are numbers or "a/b" fraction strings. Locations, engineer
// positions and cluster members are 1-based in files.

#include "kdtmpa/instance.hpp"

#include <cstdio>
#include <fstream>
#include <map>
#include <set>

#include "json.hpp"

namespace kdtmpa {

using Json = nlohmann::json;

namespace detail {
inline void reject_unknown(const Json& obj, const std::set<std::string>& allowed, const std::string& where) {
    if (!obj.is_object()) throw ValidationError(where + ": expected an object");
    for (const auto& [key, _] : obj.items())
        if (!allowed.count(key)) throw ValidationError(where + ": unknown key '" + key + "'");
}

inline double parse_probability(const Json& v, const std::string& where) {
    if (v.is_number()) return v.get<double>();
    if (v.is_string()) {
        const auto s = v.get<std::string>();
        const auto slash = s.find('/');
        try {
            if (slash == std::string::npos) return std::stod(s);
            const double num = std::stod(s.substr(0, slash)), den = std::stod(s.substr(slash + 1));
            if (den == 0.0) throw ValidationError(where + ": zero denominator");
            return num / den;
        } catch (const std::logic_error&) {
            throw ValidationError(where + ": cannot parse '" + s + "'");
        }
    }
    throw ValidationError(where + ": expected a number or a fraction string");
}

template <class T>
T get_field(const Json& obj, const char* key, const std::string& where) {
    if (!obj.contains(key)) throw ValidationError(where + ": missing '" + key + "'");
    try {
        return obj.at(key).get<T>();
    } catch (const Json::exception&) {
        throw ValidationError(where + "." + key + ": wrong type");
    }
}

/// Geometric parameters from a full matrix; rejects anything but
/// stay-or-advance-by-one rows with an absorbing last row.
inline std::vector<double> parse_degradation(const Json& mat, const std::string& where) {
    if (!mat.is_array() || mat.size() < 2) throw ValidationError(where + ": expected a square matrix with at least 2 rows");
    const std::size_t n = mat.size();
    std::vector<double> p;
    for (std::size_t i = 0; i < n; ++i) {
        const std::string rw = where + "[" + std::to_string(i + 1) + "]";
        if (!mat[i].is_array() || mat[i].size() != n) throw ValidationError(rw + ": row length must equal the number of states");
        double sum = 0.0;
        for (std::size_t j = 0; j < n; ++j) {
            const double q = parse_probability(mat[i][j], rw + "[" + std::to_string(j + 1) + "]");
            if (!(q >= 0.0 && q <= 1.0)) throw ValidationError(rw + ": entries must lie in [0, 1]");
            if (q != 0.0 && j != i && j != i + 1)
                throw ValidationError(rw + ": only stay or advance-by-one transitions are supported");
            sum += q;
        }
        if (std::abs(sum - 1.0) > 1e-9) throw ValidationError(rw + ": row sums to " + std::to_string(sum) + ", not 1");
        if (i + 1 < n) p.push_back(parse_probability(mat[i][i + 1], rw));
        else if (parse_probability(mat[i][i], rw) != 1.0) throw ValidationError(rw + ": failed state must be absorbing");
    }
    return p;
}
} // namespace detail

/// Parses and validates an instance document.
inline Instance instance_from_json(const Json& doc) {
    using detail::get_field;
    detail::reject_unknown(doc, {"name", "description", "gamma", "locations", "coords", "travel", "degradation",
                                 "machines", "costs", "engineers", "clusters"},
                           "instance");
    Instance inst;
    inst.name = get_field<std::string>(doc, "name", "instance");
    inst.gamma = get_field<double>(doc, "gamma", "instance");
    const auto travel = get_field<std::vector<std::vector<int>>>(doc, "travel", "instance");
    const auto M = travel.size();
    for (std::size_t i = 0; i < M; ++i) {
        if (travel[i].size() != M) throw ValidationError("travel[" + std::to_string(i + 1) + "]: expected " + std::to_string(M) + " entries");
        inst.travel.insert(inst.travel.end(), travel[i].begin(), travel[i].end());
    }
    if (doc.contains("locations")) inst.location_names = get_field<std::vector<std::string>>(doc, "locations", "instance");
    if (doc.contains("coords")) {
        inst.coords.emplace();
        for (const auto& c : get_field<std::vector<std::vector<double>>>(doc, "coords", "instance")) {
            if (c.size() != 2) throw ValidationError("coords: expected pairs");
            inst.coords->push_back({c[0], c[1]});
        }
    }

    std::map<std::string, std::vector<double>> matrices;
    const auto& deg = doc.contains("degradation") ? doc.at("degradation") : Json::object();
    if (!deg.is_object()) throw ValidationError("degradation: expected an object of named matrices");
    for (const auto& [name, mat] : deg.items()) matrices[name] = detail::parse_degradation(mat, "degradation." + name);

    std::optional<CostStructure> base;
    if (!doc.contains("costs")) throw ValidationError("instance: missing 'costs'");
    const auto& costs = doc.at("costs");
    detail::reject_unknown(costs, {"structure", "pm", "cm", "downtime", "travel"}, "costs");
    if (costs.contains("structure")) {
        inst.cost_structure = get_field<std::string>(costs, "structure", "costs");
        base = named_cost_structure(inst.cost_structure);
        if (!base) throw ValidationError("costs.structure: unknown cost structure '" + inst.cost_structure + "'");
    } else {
        inst.cost_structure = "custom";
        base = CostStructure{0.0, 0.0, 0.0, 0.0};
    }
    if (costs.contains("pm")) base->pm = get_field<double>(costs, "pm", "costs");
    if (costs.contains("cm")) base->cm = get_field<double>(costs, "cm", "costs");
    if (costs.contains("downtime")) base->downtime = get_field<double>(costs, "downtime", "costs");
    if (costs.contains("travel")) base->travel = get_field<double>(costs, "travel", "costs");
    inst.cost_travel = base->travel;

    if (!doc.contains("machines") || !doc.at("machines").is_array()) throw ValidationError("instance: 'machines' must be an array");
    std::size_t idx = 0;
    for (const auto& mj : doc.at("machines")) {
        const std::string where = "machines[" + std::to_string(++idx) + "]";
        detail::reject_unknown(mj, {"degradation", "repair_pm", "repair_cm", "cost_pm", "cost_cm", "cost_downtime"}, where);
        Machine m;
        m.degradation_name = get_field<std::string>(mj, "degradation", where);
        auto it = matrices.find(m.degradation_name);
        if (it == matrices.end()) throw ValidationError(where + ".degradation: unknown matrix '" + m.degradation_name + "'");
        m.advance_prob = it->second;
        m.repair_pm = get_field<int>(mj, "repair_pm", where);
        m.repair_cm = get_field<int>(mj, "repair_cm", where);
        m.cost_pm = mj.contains("cost_pm") ? get_field<double>(mj, "cost_pm", where) : base->pm;
        m.cost_cm = mj.contains("cost_cm") ? get_field<double>(mj, "cost_cm", where) : base->cm;
        m.cost_downtime = mj.contains("cost_downtime") ? get_field<double>(mj, "cost_downtime", where) : base->downtime;
        inst.machines.push_back(std::move(m));
    }
    if (inst.machines.size() != M)
        throw ValidationError("machines: " + std::to_string(inst.machines.size()) + " machines but a " + std::to_string(M) +
                              "x" + std::to_string(M) + " travel matrix");

    for (int l : get_field<std::vector<int>>(doc, "engineers", "instance")) inst.initial_locations.push_back(l - 1);
    if (doc.contains("clusters")) {
        inst.clusters.emplace();
        for (auto c : get_field<std::vector<std::vector<int>>>(doc, "clusters", "instance")) {
            for (int& m : c) --m;
            inst.clusters->push_back(std::move(c));
        }
    }
    validate(inst);
    return inst;
}

/// Canonical document of an instance. Matrices are regenerated from the
/// machines' parameters, one per distinct degradation label.
inline Json instance_to_json(const Instance& inst) {
    const int M = inst.machine_count();
    Json doc;
    doc["name"] = inst.name;
    doc["gamma"] = inst.gamma;
    if (!inst.location_names.empty()) doc["locations"] = inst.location_names;
    if (inst.coords) {
        Json c = Json::array();
        for (const auto& p : *inst.coords) c.push_back({p[0], p[1]});
        doc["coords"] = c;
    }
    Json travel = Json::array();
    for (int i = 0; i < M; ++i) {
        Json row = Json::array();
        for (int j = 0; j < M; ++j) row.push_back(inst.travel_time(i, j));
        travel.push_back(row);
    }
    doc["travel"] = travel;
    Json deg = Json::object();
    Json machines = Json::array();
    for (int m = 0; m < M; ++m) {
        const auto& mc = inst.machines[m];
        std::string label = mc.degradation_name.empty() ? "D" + std::to_string(m + 1) : mc.degradation_name;
        // Distinct parameter vectors sharing a label get a suffix.
        auto make = [&] {
            const int n = mc.states();
            Json mat = Json::array();
            for (int i = 0; i < n; ++i) {
                Json row = Json::array();
                for (int j = 0; j < n; ++j) {
                    double q = 0.0;
                    if (i + 1 < n && j == i) q = 1.0 - mc.advance_prob[i];
                    else if (i + 1 < n && j == i + 1) q = mc.advance_prob[i];
                    else if (i + 1 == n && j == i) q = 1.0;
                    row.push_back(q);
                }
                mat.push_back(row);
            }
            return mat;
        };
        const Json mat = make();
        std::string key = label;
        for (int suffix = 2; deg.contains(key) && deg[key] != mat; ++suffix) key = label + "#" + std::to_string(suffix);
        deg[key] = mat;
        machines.push_back({{"degradation", key},
                            {"repair_pm", mc.repair_pm},
                            {"repair_cm", mc.repair_cm},
                            {"cost_pm", mc.cost_pm},
                            {"cost_cm", mc.cost_cm},
                            {"cost_downtime", mc.cost_downtime}});
    }
    doc["degradation"] = deg;
    doc["machines"] = machines;
    Json costs = {{"travel", inst.cost_travel}};
    if (auto cs = named_cost_structure(inst.cost_structure)) costs["structure"] = inst.cost_structure;
    doc["costs"] = costs;
    Json eng = Json::array();
    for (int l : inst.initial_locations) eng.push_back(l + 1);
    doc["engineers"] = eng;
    if (inst.clusters) {
        Json cl = Json::array();
        for (const auto& c : *inst.clusters) {
            Json row = Json::array();
            for (int m : c) row.push_back(m + 1);
            cl.push_back(row);
        }
        doc["clusters"] = cl;
    }
    return doc;
}

/// FNV-1a over the canonical serialization of the instance value.
inline std::uint64_t instance_hash(const Instance& inst) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : instance_to_json(inst).dump()) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

inline std::string hash_hex(std::uint64_t h) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(h));
    return buf;
}

inline Instance load_instance(const std::string& path) {
    std::ifstream f(path);
    if (!f) throw ValidationError("cannot open instance file '" + path + "'");
    Json doc;
    try {
        doc = Json::parse(f);
    } catch (const Json::parse_error& e) {
        throw ValidationError("instance file '" + path + "': " + e.what());
    }
    return instance_from_json(doc);
}

inline void save_instance(const std::string& path, const Instance& inst) {
    std::ofstream f(path);
    if (!f) throw ValidationError("cannot write instance file '" + path + "'");
    f << instance_to_json(inst).dump(2) << "\n";
}

} // namespace kdtmpa
