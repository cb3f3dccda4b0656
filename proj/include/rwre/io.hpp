#pragma once

#include "rwre/environment.hpp"
#include "rwre/error.hpp"
#include "rwre/level2.hpp"
#include "rwre/mc.hpp"
#include "rwre/pair_measure.hpp"
#include "rwre/passage.hpp"
#include "rwre/rate.hpp"

#include "json.hpp"

#include <cmath>
#include <cstdint>
#include <cstdio>
#include <fstream>
#include <map>
#include <sstream>
#include <string>
#include <vector>

#ifndef RWRE_VERSION
#define RWRE_VERSION "0.0.0"
#endif

namespace rwre::io {

using json = nlohmann::json;

inline constexpr const char* kVersion = RWRE_VERSION;

/// 64-bit FNV-1a.
inline std::uint64_t fnv1a(const std::string& s) {
    std::uint64_t h = 0xcbf29ce484222325ULL;
    for (unsigned char c : s) {
        h ^= c;
        h *= 0x100000001b3ULL;
    }
    return h;
}

/// Hash of the canonical dump (objects are key-sorted by nlohmann::json).
inline std::string config_hash(const json& config) {
    char buf[17];
    std::snprintf(buf, sizeof buf, "%016llx", static_cast<unsigned long long>(fnv1a(config.dump())));
    return buf;
}

/// First line of every output file.
inline std::string header_line(const std::string& hash) {
    return std::string("# rwre-ldp ") + kVersion + " config=" + hash + "\n";
}

/// 17 significant digits; non-finite values print as inf, -inf, nan.
inline std::string fmt(double v) {
    if (std::isnan(v)) return "nan";
    if (std::isinf(v)) return v > 0 ? "inf" : "-inf";
    char buf[40];
    std::snprintf(buf, sizeof buf, "%.17g", v);
    return buf;
}

/// JSON has no infinities; they are written as strings.
inline json num(double v) {
    if (std::isfinite(v)) return v;
    return fmt(v);
}

/// Buffered output file that starts with the header line.
class OutputFile {
public:
    OutputFile(std::string path, const std::string& hash) : path_(std::move(path)) { buf_ << header_line(hash); }

    template <class T>
    OutputFile& operator<<(const T& v) {
        buf_ << v;
        return *this;
    }
    void row(const std::vector<std::string>& cells) {
        for (std::size_t i = 0; i < cells.size(); ++i) buf_ << (i ? "," : "") << cells[i];
        buf_ << "\n";
    }
    void json_line(const json& j) { buf_ << j.dump() << "\n"; }

    void write() const {
        std::ofstream f(path_, std::ios::binary);
        if (!f) throw Error("cannot open output file " + path_);
        f << buf_.str();
        if (!f) throw Error("write failed for " + path_);
    }
    const std::string& path() const noexcept { return path_; }

private:
    std::string path_;
    std::ostringstream buf_;
};

// ---------------------------------------------------------------------------
// Record serializers
// ---------------------------------------------------------------------------

inline void write_lambda_curve(OutputFile& f, const std::vector<LambdaCurveRow>& rows) {
    f.row({"r", "lambda", "lambda_bar", "converged", "n_used", "M_used"});
    for (const auto& r : rows)
        f.row({fmt(r.r), fmt(r.lambda), fmt(r.lambda_bar), r.converged ? "1" : "0", std::to_string(r.n_used),
               std::to_string(r.M_used)});
}

inline void write_rate_curve(OutputFile& f, const std::vector<RateValue>& rows) {
    f.row({"xi", "I", "r_star", "branch", "err_flag"});
    for (const auto& r : rows) f.row({fmt(r.xi), fmt(r.value), fmt(r.r_star), to_string(r.branch), r.flag});
}

inline void write_pair_measure(OutputFile& f, const PairMeasure& mu) {
    f.row({"site_class", "offset", "weight"});
    for (std::size_t i = 0; i < mu.L; ++i)
        for (int z : JumpLaw::offsets(mu.B)) f.row({std::to_string(i), std::to_string(z), fmt(mu.at(i, z))});
}

inline json to_json(const McReport& r) {
    json extra = json::object();
    for (const auto& [k, v] : r.extra) extra[k] = num(v);
    return {{"check", r.check},
            {"kind", r.kind == McReport::Kind::two_sided ? "two-sided" : "upper-bound"},
            {"estimate", num(r.estimate)},
            {"std_error", num(r.std_error)},
            {"replicas", r.replicas},
            {"target", num(r.target)},
            {"z_score", num(r.z_score)},
            {"gate", r.gate},
            {"pass", r.pass},
            {"failures", r.failures},
            {"invalidated", r.invalidated},
            {"hard_violation", r.hard_violation},
            {"power_2x", num(r.power_2x)},
            {"rng", CounterRng::algorithm},
            {"extra", extra}};
}

inline json to_json(const MinimizeReport& r, double xi) {
    return {{"xi", num(xi)},
            {"value", num(r.value)},
            {"iterations", r.iterations},
            {"converged", r.converged},
            {"start_theta", num(r.start_theta)},
            {"drift_multiplier", num(r.drift_multiplier)},
            {"residuals",
             {{"projected_gradient", num(r.projected_gradient)},
              {"mass", num(r.mass_residual)},
              {"stationarity", num(r.stationarity_residual)},
              {"drift", num(r.drift_residual)}}}};
}

inline json to_json(const RcEstimate& rc) {
    return {{"lo", num(rc.lo)},          {"hi", num(rc.hi)},
            {"lo_bar", num(rc.lo_bar)},  {"hi_bar", num(rc.hi_bar)},
            {"interval", rc.interval},   {"truncation_bias", num(rc.truncation_bias)},
            {"direction_gap", num(rc.direction_gap())}};
}

inline json to_json(const XiCritical& x) {
    return {{"xi_c", {num(x.lo), num(x.hi)}}, {"xi_bar_c", {num(x.bar_lo), num(x.bar_hi)}}, {"widened", x.widened}};
}

} // namespace rwre::io
