#pragma once

#include <stdexcept>
#include <string>

namespace rwre {

// Base of every exception thrown by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class InvalidArgument : public Error {
public:
    using Error::Error;
};

// A windowed environment was queried outside of its sampled sites.
class WindowExhausted : public Error {
public:
    WindowExhausted(long long site, long long lo, long long hi)
        : Error("site " + std::to_string(site) + " outside sampled window [" +
                std::to_string(lo) + ", " + std::to_string(hi) + "]"),
          site_(site) {}
    long long site() const noexcept { return site_; }

private:
    long long site_;
};

// The passage-time MGF is infinite (r above r_c) or the truncated solve blew up.
class Supercritical : public Error {
public:
    Supercritical(const std::string& what, double r) : Error(what), r_(r) {}
    double r() const noexcept { return r_; }

private:
    double r_;
};

// Iterative method ran out of budget before meeting its tolerance.
class NotConverged : public Error {
public:
    NotConverged(const std::string& what, double gap) : Error(what), gap_(gap) {}
    double gap() const noexcept { return gap_; }

private:
    double gap_;
};

// Two routes to the same quantity disagree beyond their gate, or a structural
// identity (cocycle, antisymmetry, telescoping) failed.
class Inconsistency : public Error {
public:
    using Error::Error;
};

class Infeasible : public Error {
public:
    using Error::Error;
};

} // namespace rwre
