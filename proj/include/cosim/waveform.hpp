#pragma once

#include <map>
#include <string>
#include <vector>

#include "cosim/errors.hpp"
#include "cosim/linalg.hpp"

namespace cosim {

/// Piecewise-linear time signal exchanged between subsystems. Linear
/// interpolation between samples, constant extrapolation outside the
/// sampled window.
class Waveform {
public:
    Waveform() = default;

    static Waveform constant(double t, Vector value) {
        Waveform w;
        w.append(t, std::move(value));
        return w;
    }

    void append(double t, Vector value) {
        if (!t_.empty() && t <= t_.back())
            throw Error("Waveform: samples must be strictly increasing in time");
        t_.push_back(t);
        v_.push_back(std::move(value));
    }

    bool empty() const { return t_.empty(); }
    std::size_t size() const { return t_.size(); }
    double front_time() const { return t_.front(); }
    double back_time() const { return t_.back(); }
    const std::vector<double>& times() const { return t_; }
    const std::vector<Vector>& values() const { return v_; }

    Vector sample(double t) const {
        if (t_.empty()) throw Error("Waveform: sampling an empty waveform");
        if (t <= t_.front()) return v_.front();
        if (t >= t_.back()) return v_.back();
        // nodes are hit exactly: interpolation only strictly between samples
        auto it = std::lower_bound(t_.begin(), t_.end(), t);
        const std::size_t hi = static_cast<std::size_t>(it - t_.begin());
        if (t_[hi] == t) return v_[hi];
        const std::size_t lo = hi - 1;
        const double w = (t - t_[lo]) / (t_[hi] - t_[lo]);
        Vector out(v_[lo].size());
        for (std::size_t i = 0; i < out.size(); ++i)
            out[i] = (1.0 - w) * v_[lo][i] + w * v_[hi][i];
        return out;
    }

private:
    std::vector<double> t_;
    std::vector<Vector> v_;
};

/// Port name → waveform / value maps. Ordered maps keep every iteration
/// deterministic.
using WaveformSet = std::map<std::string, Waveform>;
using PortValues = std::map<std::string, Vector>;

inline PortValues sample_all(const WaveformSet& ws, double t) {
    PortValues out;
    for (const auto& [name, w] : ws) out.emplace(name, w.sample(t));
    return out;
}

}  // namespace cosim
