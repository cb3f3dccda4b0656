#pragma once

#include "rwre/environment.hpp"
#include "rwre/error.hpp"

#include "json.hpp"

#include <charconv>
#include <cstdint>
#include <string>
#include <vector>

namespace rwre {

/// Schema violation; pointer() is the JSON pointer of the offending key.
class ConfigError : public Error {
public:
    ConfigError(std::string pointer, const std::string& what)
        : Error(pointer + ": " + what), pointer_(std::move(pointer)) {}
    const std::string& pointer() const noexcept { return pointer_; }

private:
    std::string pointer_;
};

namespace cfg {

using json = nlohmann::json;

/// A JSON node paired with its pointer, for error messages.
class Node {
public:
    Node(const json& j, std::string ptr) : j_(&j), ptr_(std::move(ptr)) {}

    const json& raw() const noexcept { return *j_; }
    const std::string& pointer() const noexcept { return ptr_; }
    std::string child_pointer(const std::string& key) const { return ptr_ + "/" + key; }

    bool has(const std::string& key) const { return j_->is_object() && j_->contains(key); }

    Node at(const std::string& key) const {
        if (!j_->is_object()) throw ConfigError(ptr_.empty() ? "/" : ptr_, "expected an object");
        auto it = j_->find(key);
        if (it == j_->end()) throw ConfigError(child_pointer(key), "required key is missing");
        return Node(*it, child_pointer(key));
    }
    Node at(std::size_t i) const {
        if (!j_->is_array() || i >= j_->size()) throw ConfigError(ptr_, "index out of range");
        return Node((*j_)[i], ptr_ + "/" + std::to_string(i));
    }
    std::size_t size() const { return j_->size(); }

    double number() const {
        if (!j_->is_number()) throw ConfigError(ptr_, "expected a number");
        return j_->get<double>();
    }
    double positive() const {
        double v = number();
        if (!(v > 0.0)) throw ConfigError(ptr_, "must be positive");
        return v;
    }
    long long integer() const {
        if (j_->is_number_integer()) return j_->get<long long>();
        if (j_->is_number_float()) {
            double v = j_->get<double>();
            if (v == static_cast<double>(static_cast<long long>(v))) return static_cast<long long>(v);
        }
        throw ConfigError(ptr_, "expected an integer");
    }
    std::uint64_t seed() const {
        if (j_->is_number_unsigned()) return j_->get<std::uint64_t>();
        long long v = integer();
        if (v < 0) throw ConfigError(ptr_, "seed must be nonnegative");
        return static_cast<std::uint64_t>(v);
    }
    std::string string() const {
        if (!j_->is_string()) throw ConfigError(ptr_, "expected a string");
        return j_->get<std::string>();
    }
    bool boolean() const {
        if (!j_->is_boolean()) throw ConfigError(ptr_, "expected true or false");
        return j_->get<bool>();
    }
    void require_array(std::size_t min_size = 0) const {
        if (!j_->is_array()) throw ConfigError(ptr_, "expected an array");
        if (j_->size() < min_size)
            throw ConfigError(ptr_, "needs at least " + std::to_string(min_size) + " entries");
    }

    double number_or(const std::string& key, double dflt) const { return has(key) ? at(key).number() : dflt; }
    double positive_or(const std::string& key, double dflt) const { return has(key) ? at(key).positive() : dflt; }
    long long integer_or(const std::string& key, long long dflt) const {
        return has(key) ? at(key).integer() : dflt;
    }
    std::vector<double> numbers() const {
        require_array(1);
        std::vector<double> out;
        for (std::size_t i = 0; i < size(); ++i) out.push_back(at(i).number());
        return out;
    }

private:
    const json* j_;
    std::string ptr_;
};

/// {"-1": p, "1": q, ...}; missing offsets are 0.
inline JumpLaw parse_law(const Node& n, int B) {
    if (!n.raw().is_object()) throw ConfigError(n.pointer(), "law must be an object keyed by offset");
    JumpLaw law(B);
    for (const auto& [key, val] : n.raw().items()) {
        int z = 0;
        auto [p, ec] = std::from_chars(key.data(), key.data() + key.size(), z);
        if (ec != std::errc() || p != key.data() + key.size())
            throw ConfigError(n.child_pointer(key), "offset key is not an integer");
        if (z == 0 || std::abs(z) > B)
            throw ConfigError(n.child_pointer(key), "offset outside {-B..-1, 1..B} with B=" + std::to_string(B));
        law.set(z, Node(val, n.child_pointer(key)).number());
    }
    return law;
}

inline void check_law(const JumpLaw& law, double delta, const std::string& ptr) {
    Environment probe = Environment::homogeneous(law, delta);
    EnvDiagnostics d = validate(probe);
    if (!d.ok()) throw ConfigError(ptr, d.violations.front().message);
}

/// Environment from its JSON description; every law is validated.
inline Environment parse_environment(const Node& n) {
    const std::string type = n.at("type").string();
    const long long Bll = n.at("B").integer();
    if (Bll < 1 || Bll > 64) throw ConfigError(n.child_pointer("B"), "B must be in [1, 64]");
    const int B = static_cast<int>(Bll);
    const double delta = n.at("delta").number();
    if (!(delta > 0.0 && delta <= 0.5)) throw ConfigError(n.child_pointer("delta"), "delta must be in (0, 1/2]");

    if (type == "homogeneous" || type == "periodic") {
        Node laws = n.at("laws");
        laws.require_array(1);
        if (type == "homogeneous" && laws.size() != 1)
            throw ConfigError(laws.pointer(), "homogeneous environment takes exactly one law");
        std::vector<JumpLaw> out;
        for (std::size_t i = 0; i < laws.size(); ++i) {
            Node li = laws.at(i);
            out.push_back(parse_law(li, B));
            check_law(out.back(), delta, li.pointer());
        }
        if (type == "homogeneous") return Environment::homogeneous(out.front(), delta);
        return Environment::periodic(std::move(out), delta);
    }
    if (type == "iid") {
        Node win = n.at("window");
        win.require_array(2);
        if (win.size() != 2) throw ConfigError(win.pointer(), "window is [lo, hi]");
        long long lo = win.at(0).integer(), hi = win.at(1).integer();
        if (!(lo < 0 && 0 < hi)) throw ConfigError(win.pointer(), "window must satisfy lo < 0 < hi");
        std::uint64_t seed = n.at("seed").seed();
        Node atoms = n.at("atoms");
        atoms.require_array(1);
        std::vector<LawAtom> parsed;
        for (std::size_t i = 0; i < atoms.size(); ++i) {
            Node a = atoms.at(i);
            double w = a.at("weight").number();
            if (!(w >= 0.0)) throw ConfigError(a.child_pointer("weight"), "weight must be nonnegative");
            Node ln = a.at("law");
            JumpLaw law = parse_law(ln, B);
            check_law(law, delta, ln.pointer());
            parsed.push_back({w, std::move(law)});
        }
        try {
            return sample_iid(parsed, lo, hi, seed, delta);
        } catch (const InvalidArgument& e) {
            throw ConfigError(atoms.pointer(), e.what());
        }
    }
    throw ConfigError(n.child_pointer("type"), "unknown environment type '" + type + "'");
}

inline json law_to_json(const JumpLaw& law) {
    json j = json::object();
    for (int z : law.offsets())
        if (law(z) != 0.0) j[std::to_string(z)] = law(z);
    return j;
}

} // namespace cfg
} // namespace rwre
