#pragma once

#include "rwre/error.hpp"
#include "rwre/rng.hpp"

#include <algorithm>
#include <cmath>
#include <cstdint>
#include <limits>
#include <map>
#include <span>
#include <string>
#include <utility>
#include <vector>

namespace rwre {

/// Jump distribution on the offsets {-B,...,-1,1,...,B}. Offset 0 has no slot.
class JumpLaw {
public:
    JumpLaw() = default;

    explicit JumpLaw(int B) : B_(B), probs_(static_cast<std::size_t>(2 * B), 0.0) {
        if (B < 1) throw InvalidArgument("jump bound B must be >= 1");
    }

    /// Missing offsets get probability 0.
    JumpLaw(int B, const std::map<int, double>& probs) : JumpLaw(B) {
        for (auto [z, p] : probs) {
            if (z == 0) throw InvalidArgument("offset 0 is not an allowed jump");
            if (std::abs(z) > B)
                throw InvalidArgument("offset " + std::to_string(z) + " exceeds B=" +
                                      std::to_string(B));
            probs_[index(z)] = p;
        }
    }

    static JumpLaw nearest_neighbor(double p_right) {
        return JumpLaw(1, {{-1, 1.0 - p_right}, {1, p_right}});
    }

    int B() const noexcept { return B_; }

    double operator()(int z) const noexcept {
        if (z == 0 || std::abs(z) > B_) return 0.0;
        return probs_[index(z)];
    }
    void set(int z, double p) { probs_.at(index(z)) = p; }

    /// Offsets in increasing order: -B..-1, 1..B.
    std::vector<int> offsets() const { return offsets(B_); }
    static std::vector<int> offsets(int B) {
        std::vector<int> out;
        out.reserve(static_cast<std::size_t>(2 * B));
        for (int z = -B; z <= B; ++z)
            if (z != 0) out.push_back(z);
        return out;
    }

    /// Slot of offset z in an offset-indexed array of length 2B.
    std::size_t index(int z) const noexcept { return slot(B_, z); }
    static constexpr std::size_t slot(int B, int z) noexcept {
        return static_cast<std::size_t>(z < 0 ? z + B : z + B - 1);
    }
    static constexpr int offset_at(int B, std::size_t k) noexcept {
        int i = static_cast<int>(k);
        return i < B ? i - B : i - B + 1;
    }

    std::span<const double> probs() const noexcept { return probs_; }

    double total() const noexcept {
        double s = 0.0;
        for (double p : probs_) s += p;
        return s;
    }
    double mean() const noexcept {
        double m = 0.0;
        for (std::size_t k = 0; k < probs_.size(); ++k) m += offset_at(B_, k) * probs_[k];
        return m;
    }

    JumpLaw reflected() const {
        JumpLaw out(B_);
        for (int z : offsets()) out.set(-z, (*this)(z));
        return out;
    }

    bool operator==(const JumpLaw&) const = default;

private:
    int B_ = 0;
    std::vector<double> probs_;
};

/// One-dimensional environment surrogate: homogeneous, periodic, or a finite
/// window of independently sampled sites.
class Environment {
public:
    enum class Kind { homogeneous, periodic, sampled_window };

    static Environment homogeneous(JumpLaw law, double delta) {
        return Environment(Kind::homogeneous, {std::move(law)}, 0, 0, delta);
    }

    static Environment periodic(std::vector<JumpLaw> laws, double delta) {
        if (laws.empty()) throw InvalidArgument("periodic environment needs L >= 1");
        return Environment(Kind::periodic, std::move(laws), 0, 0, delta);
    }

    /// laws[i] governs site x_lo + i.
    static Environment sampled_window(std::vector<JumpLaw> laws, long long x_lo,
                                      std::uint64_t seed, double delta) {
        if (laws.empty()) throw InvalidArgument("sampled window is empty");
        long long x_hi = x_lo + static_cast<long long>(laws.size()) - 1;
        if (!(x_lo < 0 && 0 < x_hi))
            throw InvalidArgument("sampled window must satisfy x_lo < 0 < x_hi");
        return Environment(Kind::sampled_window, std::move(laws), x_lo, seed, delta);
    }

    Kind kind() const noexcept { return kind_; }
    int B() const noexcept { return B_; }
    double delta() const noexcept { return delta_; }
    std::uint64_t seed() const noexcept { return seed_; }
    const std::vector<JumpLaw>& laws() const noexcept { return laws_; }

    /// Number of distinct site classes: L for periodic, 1 for homogeneous,
    /// window length for sampled windows.
    std::size_t period() const noexcept { return laws_.size(); }

    bool is_finite_class() const noexcept { return kind_ != Kind::sampled_window; }

    long long x_lo() const noexcept {
        return kind_ == Kind::sampled_window ? x_lo_ : std::numeric_limits<long long>::min();
    }
    long long x_hi() const noexcept {
        return kind_ == Kind::sampled_window
                   ? x_lo_ + static_cast<long long>(laws_.size()) - 1
                   : std::numeric_limits<long long>::max();
    }
    bool contains(long long x) const noexcept { return x >= x_lo() && x <= x_hi(); }

    /// Site class of x in [0, period()) for periodic/homogeneous environments.
    std::size_t site_class(long long x) const noexcept {
        long long L = static_cast<long long>(laws_.size());
        long long m = x % L;
        return static_cast<std::size_t>(m < 0 ? m + L : m);
    }

    const JumpLaw& law_at(long long x) const {
        switch (kind_) {
        case Kind::homogeneous: return laws_.front();
        case Kind::periodic: return laws_[site_class(x)];
        case Kind::sampled_window:
            if (!contains(x)) throw WindowExhausted(x, x_lo(), x_hi());
            return laws_[static_cast<std::size_t>(x - x_lo_)];
        }
        return laws_.front();
    }

    bool operator==(const Environment&) const = default;

private:
    Environment(Kind kind, std::vector<JumpLaw> laws, long long x_lo, std::uint64_t seed,
                double delta)
        : kind_(kind), laws_(std::move(laws)), x_lo_(x_lo), seed_(seed), delta_(delta) {
        if (!(delta > 0.0)) throw InvalidArgument("ellipticity constant delta must be > 0");
        B_ = laws_.front().B();
        for (const auto& l : laws_)
            if (l.B() != B_) throw InvalidArgument("all jump laws must share the same B");
    }

    Kind kind_ = Kind::homogeneous;
    std::vector<JumpLaw> laws_;
    long long x_lo_ = 0;
    std::uint64_t seed_ = 0;
    double delta_ = 0.0;
    int B_ = 1;
};

/// law_at(reflect(env), x)(z) == law_at(env, -x)(-z).
inline Environment reflect(const Environment& env) {
    std::vector<JumpLaw> out;
    out.reserve(env.laws().size());
    switch (env.kind()) {
    case Environment::Kind::homogeneous:
        return Environment::homogeneous(env.laws().front().reflected(), env.delta());
    case Environment::Kind::periodic: {
        const std::size_t L = env.period();
        for (std::size_t i = 0; i < L; ++i) out.push_back(env.laws()[(L - i) % L].reflected());
        return Environment::periodic(std::move(out), env.delta());
    }
    case Environment::Kind::sampled_window:
        for (auto it = env.laws().rbegin(); it != env.laws().rend(); ++it)
            out.push_back(it->reflected());
        return Environment::sampled_window(std::move(out), -env.x_hi(), env.seed(), env.delta());
    }
    return env;
}

struct EnvViolation {
    enum class Kind { normalization, ellipticity, negative_probability, non_finite };
    Kind kind;
    long long site;
    std::string message;
};

struct EnvDiagnostics {
    double min_plus_one_prob = 1.0;
    double min_minus_one_prob = 1.0;
    /// max over sites of |log p(z)|, per offset slot; +inf where some site has p(z)=0.
    std::vector<double> max_abs_log_prob;
    double normalization_error = 0.0;
    std::vector<EnvViolation> violations;

    bool ok() const noexcept { return violations.empty(); }
};

inline EnvDiagnostics validate(const Environment& env, double sum_tol = 1e-12) {
    EnvDiagnostics d;
    const int B = env.B();
    d.max_abs_log_prob.assign(static_cast<std::size_t>(2 * B), 0.0);
    const bool window = env.kind() == Environment::Kind::sampled_window;
    for (std::size_t i = 0; i < env.laws().size(); ++i) {
        const JumpLaw& law = env.laws()[i];
        long long site = window ? env.x_lo() + static_cast<long long>(i) : static_cast<long long>(i);
        for (std::size_t k = 0; k < law.probs().size(); ++k) {
            double p = law.probs()[k];
            if (!std::isfinite(p)) {
                d.violations.push_back({EnvViolation::Kind::non_finite, site, "non-finite probability"});
                continue;
            }
            if (p < 0.0)
                d.violations.push_back({EnvViolation::Kind::negative_probability, site,
                                        "negative probability at offset " +
                                            std::to_string(JumpLaw::offset_at(B, k))});
            double lg = p > 0.0 ? std::abs(std::log(p)) : std::numeric_limits<double>::infinity();
            d.max_abs_log_prob[k] = std::max(d.max_abs_log_prob[k], lg);
        }
        double err = std::abs(law.total() - 1.0);
        d.normalization_error = std::max(d.normalization_error, err);
        if (err > sum_tol)
            d.violations.push_back({EnvViolation::Kind::normalization, site,
                                    "probabilities sum to " + std::to_string(law.total())});
        d.min_plus_one_prob = std::min(d.min_plus_one_prob, law(1));
        d.min_minus_one_prob = std::min(d.min_minus_one_prob, law(-1));
        if (law(1) < env.delta() || law(-1) < env.delta())
            d.violations.push_back({EnvViolation::Kind::ellipticity, site,
                                    "p(+1)=" + std::to_string(law(1)) + ", p(-1)=" +
                                        std::to_string(law(-1)) + " below delta=" +
                                        std::to_string(env.delta())});
    }
    return d;
}

struct LawAtom {
    double weight;
    JumpLaw law;
};

/// Independent draw per site; site x uses stream (x - x_lo) of the counter RNG.
inline Environment sample_iid(std::span<const LawAtom> atoms, long long x_lo, long long x_hi,
                              std::uint64_t seed, double delta) {
    if (atoms.empty()) throw InvalidArgument("iid site law has empty support");
    if (x_hi < x_lo) throw InvalidArgument("window bounds reversed");
    std::vector<double> cumulative;
    double total = 0.0;
    for (const auto& a : atoms) {
        if (!(a.weight >= 0.0)) throw InvalidArgument("atom weights must be nonnegative");
        total += a.weight;
        cumulative.push_back(total);
    }
    if (!(total > 0.0)) throw InvalidArgument("atom weights sum to zero");
    std::vector<JumpLaw> laws;
    laws.reserve(static_cast<std::size_t>(x_hi - x_lo + 1));
    for (long long x = x_lo; x <= x_hi; ++x) {
        CounterRng rng(seed, static_cast<std::uint64_t>(x - x_lo));
        double u = rng.uniform() * total;
        auto it = std::upper_bound(cumulative.begin(), cumulative.end(), u);
        if (it == cumulative.end()) --it;
        laws.push_back(atoms[static_cast<std::size_t>(it - cumulative.begin())].law);
    }
    return Environment::sampled_window(std::move(laws), x_lo, seed, delta);
}

} // namespace rwre
