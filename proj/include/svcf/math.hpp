#ifndef SVCF_MATH_HPP
#define SVCF_MATH_HPP

#include <cmath>
#include <cstdint>
#include <cstring>
#include <stdexcept>
#include <vector>

namespace svcf::num {

// Latent quantiles are clamped here so that H and F evaluations stay finite
// when a control set touches 0 or 1.
inline constexpr double kLatentTail = 8.2;

inline double normal_pdf(double x) {
    static const double inv_sqrt2pi = 0.3989422804014326779;
    return inv_sqrt2pi * std::exp(-0.5 * x * x);
}

inline double normal_cdf(double x) {
    return 0.5 * std::erfc(-x * 0.7071067811865475244);
}

// Wichura's PPND16 rational approximation, |error| ~ 1e-15 on (0,1).
inline double normal_quantile(double p) {
    if (!(p > 0.0) || !(p < 1.0))
        throw std::domain_error("normal_quantile: p outside (0,1)");
    const double q = p - 0.5;
    double r;
    if (std::fabs(q) <= 0.425) {
        r = 0.180625 - q * q;
        return q *
               (((((((2.5090809287301226727e3 * r + 3.3430575583588128105e4) * r +
                     6.7265770927008700853e4) * r + 4.5921953931549871457e4) * r +
                   1.3731693765509461125e4) * r + 1.9715909503065514427e3) * r +
                 1.3314166789178437745e2) * r + 3.3871328727963666080e0) /
               (((((((5.2264952788528545610e3 * r + 2.8729085735721942674e4) * r +
                     3.9307895800092710610e4) * r + 2.1213794301586595867e4) * r +
                   5.3941960214247511077e3) * r + 6.8718700749205790830e2) * r +
                 4.2313330701600911252e1) * r + 1.0);
    }
    r = (q < 0.0) ? p : 1.0 - p;
    r = std::sqrt(-std::log(r));
    double val;
    if (r <= 5.0) {
        r -= 1.6;
        val = (((((((7.74545014278341407640e-4 * r + 2.27238449892691845833e-2) * r +
                    2.41780725177450611770e-1) * r + 1.27045825245236838258e0) * r +
                  3.64784832476320460504e0) * r + 5.76949722146069140550e0) * r +
                4.63033784615654529590e0) * r + 1.42343711074968357734e0) /
              (((((((1.05075007164441684324e-9 * r + 5.47593808499534494600e-4) * r +
                    1.51986665636164571966e-2) * r + 1.48103976427480074590e-1) * r +
                  6.89767334985100004550e-1) * r + 1.67638483018380384940e0) * r +
                2.05319162663775882187e0) * r + 1.0);
    } else {
        r -= 5.0;
        val = (((((((2.01033439929228813265e-7 * r + 2.71155556874348757815e-5) * r +
                    1.24266094738807843860e-3) * r + 2.65321895265761230930e-2) * r +
                  2.96560571828504891230e-1) * r + 1.78482653991729133580e0) * r +
                5.46378491116411436990e0) * r + 6.65790464350110377720e0) /
              (((((((2.04426310338993978564e-15 * r + 1.42151175831644588870e-7) * r +
                    1.84631831751005468180e-5) * r + 7.86869131145613259100e-4) * r +
                  1.48753612908506148525e-2) * r + 1.36929880922735805310e-1) * r +
                5.99832206555887937690e-1) * r + 1.0);
    }
    return (q < 0.0) ? -val : val;
}

// Quantile used inside structural formulas; endpoints map to -/+ kLatentTail.
inline double latent_quantile(double p) {
    if (p <= 0.0) return -kLatentTail;
    if (p >= 1.0) return kLatentTail;
    double v = normal_quantile(p);
    if (v < -kLatentTail) return -kLatentTail;
    if (v > kLatentTail) return kLatentTail;
    return v;
}

struct Quadrature {
    std::vector<double> nodes;   // on [0,1]
    std::vector<double> weights; // sum to 1
};

// Gauss-Legendre nodes by Newton iteration on P_n, mapped to [0,1].
inline Quadrature gauss_legendre_unit(int n) {
    if (n < 1) throw std::invalid_argument("gauss_legendre_unit: n < 1");
    Quadrature q;
    q.nodes.resize(n);
    q.weights.resize(n);
    for (int i = 0; i < (n + 1) / 2; ++i) {
        double x = std::cos(M_PI * (i + 0.75) / (n + 0.5));
        double dp = 0.0;
        for (int it = 0; it < 100; ++it) {
            double p0 = 1.0, p1 = x;
            for (int k = 2; k <= n; ++k) {
                double p2 = ((2.0 * k - 1.0) * x * p1 - (k - 1.0) * p0) / k;
                p0 = p1;
                p1 = p2;
            }
            dp = n * (x * p1 - p0) / (x * x - 1.0);
            double dx = p1 / dp;
            x -= dx;
            if (std::fabs(dx) < 1e-15) break;
        }
        double w = 2.0 / ((1.0 - x * x) * dp * dp);
        q.nodes[i] = 0.5 * (1.0 - x);
        q.nodes[n - 1 - i] = 0.5 * (1.0 + x);
        q.weights[i] = 0.5 * w;
        q.weights[n - 1 - i] = 0.5 * w;
    }
    return q;
}

inline const Quadrature& unit_quadrature64() {
    static const Quadrature q = gauss_legendre_unit(64);
    return q;
}

inline std::vector<double> linspace(double lo, double hi, int n) {
    std::vector<double> out;
    if (n <= 0) return out;
    if (n == 1) {
        out.push_back(0.5 * (lo + hi));
        return out;
    }
    out.reserve(n);
    for (int i = 0; i < n; ++i)
        out.push_back(lo + (hi - lo) * static_cast<double>(i) / (n - 1));
    out.back() = hi;
    return out;
}

// ---- counter-based RNG ----------------------------------------------------
//
// Stateless draws: value = mix(key, counter).  Chunk and thread layout cannot
// change the stream, which keeps simulated datasets bit-identical.

inline std::uint64_t splitmix64(std::uint64_t z) {
    z += 0x9e3779b97f4a7c15ull;
    z = (z ^ (z >> 30)) * 0xbf58476d1ce4e5b9ull;
    z = (z ^ (z >> 27)) * 0x94d049bb133111ebull;
    return z ^ (z >> 31);
}

inline std::uint64_t mix_key(std::uint64_t a, std::uint64_t b) {
    return splitmix64(splitmix64(a) ^ (b + 0x9e3779b97f4a7c15ull));
}

class CounterRng {
  public:
    explicit CounterRng(std::uint64_t key) : key_(key) {}

    static CounterRng keyed(std::uint64_t seed, std::uint64_t stream) {
        return CounterRng(mix_key(seed, stream));
    }

    double uniform(std::uint64_t counter) const {
        std::uint64_t bits = splitmix64(key_ ^ splitmix64(counter + 0x632be59bd9b4e019ull));
        return (static_cast<double>(bits >> 11) + 0.5) * 0x1.0p-53; // in (0,1)
    }

    double normal(std::uint64_t counter) const {
        return normal_quantile(uniform(counter));
    }

    std::uint64_t key() const { return key_; }

  private:
    std::uint64_t key_;
};

inline std::uint64_t fnv1a64(const void* data, std::size_t n,
                             std::uint64_t h = 0xcbf29ce484222325ull) {
    const unsigned char* p = static_cast<const unsigned char*>(data);
    for (std::size_t i = 0; i < n; ++i) {
        h ^= p[i];
        h *= 0x100000001b3ull;
    }
    return h;
}

inline std::uint64_t hash_doubles(const std::vector<double>& xs, std::uint64_t h0) {
    std::uint64_t h = h0;
    for (double x : xs) {
        std::uint64_t bits;
        std::memcpy(&bits, &x, sizeof bits);
        h = fnv1a64(&bits, sizeof bits, h);
    }
    return h;
}

} // namespace svcf::num

#endif
