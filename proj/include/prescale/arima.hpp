#pragma once

#include <algorithm>
#include <cmath>
#include <complex>
#include <cstdint>
#include <fstream>
#include <numeric>
#include <string>
#include <tuple>
#include <vector>

#include <json.hpp>

#include "prescale/errors.hpp"

namespace prescale {

inline constexpr int kDefaultOrderCap = 5;

struct ArimaOrder {
    int p = 0; // AR lags
    int d = 0; // differencing count
    int q = 0; // MA lags

    bool operator==(const ArimaOrder&) const = default;

    void validate(int cap = kDefaultOrderCap) const {
        if (p < 0 || d < 0 || q < 0 || p > cap || d > cap || q > cap)
            throw std::invalid_argument("ArimaOrder: orders must lie in [0, " +
                                        std::to_string(cap) + "]");
        if (p + q == 0 && d == 0)
            throw std::invalid_argument("ArimaOrder: (0,0,0) is not a model");
    }

    std::string label() const {
        return "ARIMA(" + std::to_string(p) + "," + std::to_string(d) + "," +
               std::to_string(q) + ")";
    }
};

/// Fitted model plus the state needed to continue forecasting from the end
/// of the training series. The modeled process is the d-times differenced,
/// mean-centered series z:
///   z[t] = sum_i ar[i]*z[t-1-i] + eps[t] + sum_j ma[j]*eps[t-1-j]
/// Pure integrated models (p+q == 0) carry no intercept: they forecast the
/// exact polynomial extrapolation of the last d points.
struct ArimaModel {
    ArimaOrder order;
    std::vector<double> ar;
    std::vector<double> ma;
    double intercept = 0.0;         // mean of the differenced series
    double residual_variance = 0.0;
    std::vector<double> tail_original;  // last d original observations, oldest first
    std::vector<double> tail_values;    // last p centered differenced values
    std::vector<double> tail_residuals; // last q residuals
};

struct FitReport {
    ArimaOrder order;
    double mse = 0.0; // one-step prediction MSE (in-sample from fit, holdout from grid_select)
    bool converged = false;
    int iterations = 0;
};

struct FitResult {
    ArimaModel model;
    FitReport report;
};

struct FitOptions {
    double tolerance = 1e-8; // relative objective improvement
    int max_iterations = 500;
};

/// First-difference operator applied d times; output length shrinks by d.
inline std::vector<double> difference(const std::vector<double>& series, int d) {
    if (d < 0)
        throw std::invalid_argument("difference: d must be >= 0");
    if (static_cast<int>(series.size()) <= d)
        throw std::invalid_argument("difference: series length must exceed d");
    std::vector<double> out = series;
    for (int round = 0; round < d; ++round) {
        for (std::size_t t = out.size() - 1; t > 0; --t)
            out[t] -= out[t - 1];
        out.erase(out.begin());
    }
    return out;
}

/// Inverts `difference` by cumulative sums. anchor holds the last d original
/// observations (oldest first) preceding the differenced segment.
inline std::vector<double> undifference(const std::vector<double>& diffed,
                                        const std::vector<double>& anchor, int d) {
    if (static_cast<int>(anchor.size()) != d)
        throw std::invalid_argument("undifference: anchor must hold exactly d values");
    if (d == 0)
        return diffed;
    // level_tail[level] is the most recent value of the level-times
    // differenced anchor window; level 0 is the original scale.
    std::vector<double> level_tail(static_cast<std::size_t>(d));
    std::vector<double> work(anchor);
    for (int level = 0; level < d; ++level) {
        level_tail[static_cast<std::size_t>(level)] = work.back();
        for (std::size_t i = work.size() - 1; i > 0; --i)
            work[i] -= work[i - 1];
        work.erase(work.begin());
    }
    std::vector<double> out = diffed;
    for (int level = d - 1; level >= 0; --level) {
        double acc = level_tail[level];
        for (double& v : out) {
            acc += v;
            v = acc;
        }
    }
    return out;
}

namespace detail {

/// Conditional residuals: the first max(p,q) residuals of z are fixed at
/// zero, the rest follow the ARMA recursion.
inline void css_residuals(const std::vector<double>& z, const std::vector<double>& phi,
                          const std::vector<double>& theta, std::vector<double>& e) {
    const std::size_t p = phi.size(), q = theta.size();
    const std::size_t m = std::max(p, q);
    const std::size_t n = z.size();
    e.assign(n, 0.0);
    for (std::size_t t = m; t < n; ++t) {
        double acc = z[t];
        for (std::size_t i = 0; i < p; ++i)
            acc -= phi[i] * z[t - 1 - i];
        for (std::size_t j = 0; j < q; ++j)
            acc -= theta[j] * e[t - 1 - j];
        e[t] = acc;
    }
}

inline double sum_squares_from(const std::vector<double>& e, std::size_t m) {
    double acc = 0.0;
    for (std::size_t t = m; t < e.size(); ++t)
        acc += e[t] * e[t];
    return acc;
}

/// Levinson-Durbin solve of the Yule-Walker equations on biased sample
/// autocovariances. Used only as a warm start; always stationary.
inline std::vector<double> yule_walker(const std::vector<double>& z, int p) {
    const std::size_t n = z.size();
    std::vector<double> gamma(static_cast<std::size_t>(p) + 1, 0.0);
    for (int k = 0; k <= p; ++k) {
        double acc = 0.0;
        for (std::size_t t = static_cast<std::size_t>(k); t < n; ++t)
            acc += z[t] * z[t - static_cast<std::size_t>(k)];
        gamma[static_cast<std::size_t>(k)] = acc / static_cast<double>(n);
    }
    std::vector<double> phi(static_cast<std::size_t>(p), 0.0);
    if (gamma[0] <= 0.0)
        return phi;
    std::vector<double> prev(phi);
    double err = gamma[0];
    for (int k = 1; k <= p; ++k) {
        double acc = gamma[static_cast<std::size_t>(k)];
        for (int j = 1; j < k; ++j)
            acc -= prev[static_cast<std::size_t>(j - 1)] * gamma[static_cast<std::size_t>(k - j)];
        const double kappa = acc / err;
        phi[static_cast<std::size_t>(k - 1)] = kappa;
        for (int j = 1; j < k; ++j)
            phi[static_cast<std::size_t>(j - 1)] =
                prev[static_cast<std::size_t>(j - 1)] -
                kappa * prev[static_cast<std::size_t>(k - 1 - j)];
        err *= (1.0 - kappa * kappa);
        if (!(err > 0.0)) {
            std::fill(phi.begin(), phi.end(), 0.0);
            return phi;
        }
        prev = phi;
    }
    for (double v : phi)
        if (!std::isfinite(v))
            return std::vector<double>(static_cast<std::size_t>(p), 0.0);
    return phi;
}

/// Durand-Kerner root finder for real polynomials c[0] + c[1]x + ... .
/// Degree is tiny here (<= order cap) so convergence is immediate.
inline std::vector<std::complex<double>> poly_roots(std::vector<double> coeffs) {
    while (coeffs.size() > 1 && std::abs(coeffs.back()) < 1e-13)
        coeffs.pop_back();
    const int deg = static_cast<int>(coeffs.size()) - 1;
    std::vector<std::complex<double>> roots;
    if (deg < 1)
        return roots;
    std::vector<std::complex<double>> c(coeffs.begin(), coeffs.end());
    for (auto& v : c)
        v /= coeffs.back();
    roots.resize(static_cast<std::size_t>(deg));
    const std::complex<double> base(0.4, 0.9);
    std::complex<double> acc(1.0, 0.0);
    for (auto& r : roots) {
        acc *= base;
        r = acc;
    }
    auto eval = [&](std::complex<double> x) {
        std::complex<double> v = c.back();
        for (int i = deg - 1; i >= 0; --i)
            v = v * x + c[static_cast<std::size_t>(i)];
        return v;
    };
    for (int iter = 0; iter < 500; ++iter) {
        double max_step = 0.0;
        for (std::size_t j = 0; j < roots.size(); ++j) {
            std::complex<double> den(1.0, 0.0);
            for (std::size_t l = 0; l < roots.size(); ++l)
                if (l != j)
                    den *= roots[j] - roots[l];
            if (std::abs(den) < 1e-300)
                den = std::complex<double>(1e-300, 0.0);
            const std::complex<double> step = eval(roots[j]) / den;
            roots[j] -= step;
            max_step = std::max(max_step, std::abs(step));
        }
        if (max_step < 1e-13)
            break;
    }
    return roots;
}

struct ReflectOutcome {
    std::vector<double> coeffs; // lag-polynomial tail, constant term 1 dropped
    bool changed = false;
    bool boundary = false; // a root sat on the unit circle; cannot reflect
};

/// Treats `tail` as the coefficients of 1 + tail[0] x + tail[1] x^2 + ...,
/// reflects every root strictly inside the unit circle to its reciprocal,
/// and rebuilds the polynomial. Roots on the circle are left in place and
/// reported.
inline ReflectOutcome reflect_roots_outside(const std::vector<double>& tail) {
    ReflectOutcome out;
    out.coeffs = tail;
    if (tail.empty())
        return out;
    std::vector<double> poly(tail.size() + 1);
    poly[0] = 1.0;
    std::copy(tail.begin(), tail.end(), poly.begin() + 1);
    auto roots = poly_roots(poly);
    for (auto& r : roots) {
        const double mag = std::abs(r);
        if (mag < 1.0 - 1e-9) {
            r = r / (mag * mag); // 1/conj(r): same angle, reciprocal modulus
            out.changed = true;
        } else if (mag <= 1.0 + 1e-9) {
            out.boundary = true;
        }
    }
    if (!out.changed)
        return out;
    // Rebuild product of (1 - x/r) so the constant term stays 1.
    std::vector<std::complex<double>> acc{std::complex<double>(1.0, 0.0)};
    for (const auto& r : roots) {
        acc.push_back(std::complex<double>(0.0, 0.0));
        const std::complex<double> inv = std::complex<double>(1.0, 0.0) / r;
        for (std::size_t i = acc.size() - 1; i > 0; --i)
            acc[i] -= inv * acc[i - 1];
    }
    for (std::size_t i = 0; i < tail.size(); ++i)
        out.coeffs[i] = (i + 1 < acc.size()) ? acc[i + 1].real() : 0.0;
    return out;
}

inline std::vector<double> ar_polynomial_tail(const std::vector<double>& phi) {
    std::vector<double> tail(phi.size());
    for (std::size_t i = 0; i < phi.size(); ++i)
        tail[i] = -phi[i];
    return tail;
}

inline bool roots_strictly_outside(const std::vector<double>& tail) {
    if (tail.empty())
        return true;
    std::vector<double> poly(tail.size() + 1);
    poly[0] = 1.0;
    std::copy(tail.begin(), tail.end(), poly.begin() + 1);
    for (const auto& r : poly_roots(poly))
        if (std::abs(r) <= 1.0 + 1e-9)
            return false;
    return true;
}

/// Gaussian elimination with partial pivoting; systems here are at most
/// (order cap * 2) square.
inline bool solve_dense(std::vector<double> a, std::vector<double> b, std::size_t k,
                        std::vector<double>& x) {
    for (std::size_t col = 0; col < k; ++col) {
        std::size_t pivot = col;
        for (std::size_t row = col + 1; row < k; ++row)
            if (std::abs(a[row * k + col]) > std::abs(a[pivot * k + col]))
                pivot = row;
        if (std::abs(a[pivot * k + col]) < 1e-300)
            return false;
        if (pivot != col) {
            for (std::size_t j = 0; j < k; ++j)
                std::swap(a[col * k + j], a[pivot * k + j]);
            std::swap(b[col], b[pivot]);
        }
        for (std::size_t row = col + 1; row < k; ++row) {
            const double f = a[row * k + col] / a[col * k + col];
            if (f == 0.0)
                continue;
            for (std::size_t j = col; j < k; ++j)
                a[row * k + j] -= f * a[col * k + j];
            b[row] -= f * b[col];
        }
    }
    x.assign(k, 0.0);
    for (std::size_t row = k; row-- > 0;) {
        double acc = b[row];
        for (std::size_t j = row + 1; j < k; ++j)
            acc -= a[row * k + j] * x[j];
        x[row] = acc / a[row * k + row];
    }
    for (double v : x)
        if (!std::isfinite(v))
            return false;
    return true;
}

/// Residual derivatives w.r.t. each coefficient, by the same recursion that
/// defines the residuals. Column layout: p AR entries then q MA entries.
inline void css_jacobian(const std::vector<double>& z, const std::vector<double>& phi,
                         const std::vector<double>& theta, const std::vector<double>& e,
                         std::vector<std::vector<double>>& jac) {
    const std::size_t p = phi.size(), q = theta.size();
    const std::size_t m = std::max(p, q);
    const std::size_t n = z.size();
    jac.assign(p + q, std::vector<double>(n, 0.0));
    for (std::size_t a = 0; a < p; ++a) {
        auto& col = jac[a];
        for (std::size_t t = m; t < n; ++t) {
            double acc = -z[t - 1 - a];
            for (std::size_t j = 0; j < q; ++j)
                acc -= theta[j] * col[t - 1 - j];
            col[t] = acc;
        }
    }
    for (std::size_t b = 0; b < q; ++b) {
        auto& col = jac[p + b];
        for (std::size_t t = m; t < n; ++t) {
            double acc = -e[t - 1 - b];
            for (std::size_t j = 0; j < q; ++j)
                acc -= theta[j] * col[t - 1 - j];
            col[t] = acc;
        }
    }
}

} // namespace detail

/// Fits ARIMA(p,d,q) by conditional least squares: the intercept is the mean
/// of the d-times differenced series, and AR/MA coefficients minimize the
/// conditional sum of squared one-step errors via Levenberg-Marquardt with
/// analytic derivatives, warm-started from Yule-Walker for the AR part.
/// Final coefficients whose lag-polynomial roots fall inside the unit circle
/// are reflected to the stationary/invertible region; roots pinned on the
/// circle leave the fit flagged as not converged.
inline FitResult fit_arima(const std::vector<double>& series, const ArimaOrder& order,
                           const FitOptions& options = {}) {
    order.validate();
    const std::size_t p = static_cast<std::size_t>(order.p);
    const std::size_t q = static_cast<std::size_t>(order.q);
    const std::size_t need =
        10 * (p + q + 1) + static_cast<std::size_t>(order.d);
    if (series.size() < need)
        throw std::invalid_argument("fit_arima: need at least " + std::to_string(need) +
                                    " observations for " + order.label());

    std::vector<double> w = difference(series, order.d);
    const std::size_t n = w.size();

    ArimaModel model;
    model.order = order;
    model.ar.assign(p, 0.0);
    model.ma.assign(q, 0.0);
    model.tail_original.assign(series.end() - order.d, series.end());

    FitReport report;
    report.order = order;

    auto finish = [&](const std::vector<double>& z, const std::vector<double>& e,
                      std::size_t m) {
        const std::size_t count = n - m;
        const double css = detail::sum_squares_from(e, m);
        report.mse = count > 0 ? css / static_cast<double>(count) : 0.0;
        model.residual_variance = report.mse;
        model.tail_values.assign(z.end() - static_cast<std::ptrdiff_t>(p), z.end());
        model.tail_residuals.assign(e.end() - static_cast<std::ptrdiff_t>(q), e.end());
        return FitResult{model, report};
    };

    // Pure integrated model: no coefficients, no drift. Forecasts are the
    // exact polynomial extrapolation of the last d points.
    if (p + q == 0) {
        model.intercept = 0.0;
        report.converged = true;
        return finish(w, w, 0);
    }

    const auto [w_min, w_max] = std::minmax_element(w.begin(), w.end());
    if (*w_min == *w_max) {
        // Constant differenced series: nothing to estimate.
        model.intercept = *w_min;
        report.converged = true;
        std::vector<double> zeros(n, 0.0);
        return finish(zeros, zeros, std::max(p, q));
    }

    model.intercept = std::accumulate(w.begin(), w.end(), 0.0) / static_cast<double>(n);
    std::vector<double> z(n);
    for (std::size_t t = 0; t < n; ++t)
        z[t] = w[t] - model.intercept;

    const std::size_t m = std::max(p, q);
    const std::size_t k = p + q;
    std::vector<double> phi = p > 0 ? detail::yule_walker(z, order.p)
                                    : std::vector<double>();
    std::vector<double> theta(q, 0.0);

    std::vector<double> e;
    detail::css_residuals(z, phi, theta, e);
    double objective = detail::sum_squares_from(e, m);

    std::vector<std::vector<double>> jac;
    std::vector<double> hessian(k * k), gradient(k), step;
    double lambda = 1e-3;
    bool converged = false;
    int iterations = 0;

    while (iterations < options.max_iterations && !converged) {
        ++iterations;
        detail::css_jacobian(z, phi, theta, e, jac);
        for (std::size_t a = 0; a < k; ++a) {
            double g = 0.0;
            for (std::size_t t = m; t < n; ++t)
                g += jac[a][t] * e[t];
            gradient[a] = g;
            for (std::size_t b = a; b < k; ++b) {
                double h = 0.0;
                for (std::size_t t = m; t < n; ++t)
                    h += jac[a][t] * jac[b][t];
                hessian[a * k + b] = h;
                hessian[b * k + a] = h;
            }
        }

        bool accepted = false;
        for (int attempt = 0; attempt < 40 && !accepted; ++attempt) {
            std::vector<double> damped = hessian;
            for (std::size_t a = 0; a < k; ++a) {
                const double diag = std::max(hessian[a * k + a], 1e-12);
                damped[a * k + a] = hessian[a * k + a] + lambda * diag;
            }
            std::vector<double> neg_grad(k);
            for (std::size_t a = 0; a < k; ++a)
                neg_grad[a] = -gradient[a];
            if (!detail::solve_dense(damped, neg_grad, k, step)) {
                lambda *= 10.0;
                continue;
            }
            std::vector<double> phi_try(phi), theta_try(theta);
            for (std::size_t a = 0; a < p; ++a)
                phi_try[a] += step[a];
            for (std::size_t b = 0; b < q; ++b)
                theta_try[b] += step[p + b];
            std::vector<double> e_try;
            detail::css_residuals(z, phi_try, theta_try, e_try);
            const double objective_try = detail::sum_squares_from(e_try, m);
            if (std::isfinite(objective_try) && objective_try <= objective) {
                const double improvement = objective - objective_try;
                phi.swap(phi_try);
                theta.swap(theta_try);
                e.swap(e_try);
                objective = objective_try;
                lambda = std::max(lambda * 0.25, 1e-12);
                accepted = true;
                if (improvement <= options.tolerance * (objective + 1e-30))
                    converged = true;
            } else {
                lambda *= 4.0;
            }
        }
        if (!accepted)
            break; // no descent direction left at any damping
    }

    // Enforce stationarity of the AR polynomial and invertibility of the MA
    // polynomial by reflecting inside-the-circle roots.
    bool boundary = false;
    if (p > 0) {
        auto outcome = detail::reflect_roots_outside(detail::ar_polynomial_tail(phi));
        boundary |= outcome.boundary;
        if (outcome.changed)
            for (std::size_t i = 0; i < p; ++i)
                phi[i] = -outcome.coeffs[i];
    }
    if (q > 0) {
        auto outcome = detail::reflect_roots_outside(theta);
        boundary |= outcome.boundary;
        if (outcome.changed)
            theta = outcome.coeffs;
    }
    detail::css_residuals(z, phi, theta, e);

    model.ar = phi;
    model.ma = theta;
    report.converged = converged && !boundary;
    report.iterations = iterations;
    return finish(z, e, m);
}

struct ForecastResult {
    std::vector<double> values;
    bool clamped = false; // some point forecasts were negative and cut to 0
};

/// Recursive mean forecast: future shocks are zero, AR terms recurse on the
/// forecasts themselves, then differencing is inverted from the stored tail.
/// Rates are physical counts, so negative point forecasts clamp to zero.
inline ForecastResult forecast(const ArimaModel& model, int horizon_steps) {
    if (horizon_steps < 1)
        throw std::invalid_argument("forecast: horizon must be >= 1");
    const std::size_t p = model.ar.size();
    const std::size_t q = model.ma.size();
    std::vector<double> z(model.tail_values);
    std::vector<double> eps(model.tail_residuals);
    std::vector<double> w(static_cast<std::size_t>(horizon_steps));
    for (int h = 0; h < horizon_steps; ++h) {
        double acc = 0.0;
        for (std::size_t i = 0; i < p; ++i)
            acc += model.ar[i] * z[z.size() - 1 - i];
        for (std::size_t j = 0; j < q; ++j)
            acc += model.ma[j] * eps[eps.size() - 1 - j];
        z.push_back(acc);
        eps.push_back(0.0);
        w[static_cast<std::size_t>(h)] = acc + model.intercept;
    }
    ForecastResult result;
    result.values = undifference(w, model.tail_original, model.order.d);
    for (double& v : result.values) {
        if (v < 0.0) {
            v = 0.0;
            result.clamped = true;
        }
    }
    return result;
}

/// Re-derives the forecasting state of a fitted model after it has watched
/// `observed` (fixed coefficients, no refit): the residual recursion runs
/// over the observations and the tails are taken from its end.
inline ArimaModel advance_state(const ArimaModel& model, const std::vector<double>& observed) {
    const auto p = model.ar.size();
    const auto q = model.ma.size();
    const auto d = static_cast<std::size_t>(model.order.d);
    if (observed.size() < d + std::max(std::max(p, q), std::size_t{1}))
        throw std::invalid_argument("advance_state: series shorter than the model memory");
    std::vector<double> w = difference(observed, model.order.d);
    const bool centered = p + q > 0;
    std::vector<double> z(w.size());
    for (std::size_t t = 0; t < w.size(); ++t)
        z[t] = w[t] - (centered ? model.intercept : 0.0);
    std::vector<double> e;
    detail::css_residuals(z, model.ar, model.ma, e);

    ArimaModel advanced = model;
    advanced.tail_original.assign(observed.end() - model.order.d, observed.end());
    advanced.tail_values.assign(z.end() - static_cast<std::ptrdiff_t>(p), z.end());
    advanced.tail_residuals.assign(e.end() - static_cast<std::ptrdiff_t>(q), e.end());
    return advanced;
}

/// Rolling one-step errors over the holdout with fixed coefficients: the
/// residual recursion runs across train+holdout and only holdout positions
/// are scored. No refitting per step.
inline double one_step_holdout_mse(const ArimaModel& model, const std::vector<double>& train,
                                   const std::vector<double>& holdout) {
    if (holdout.empty())
        throw std::invalid_argument("one_step_holdout_mse: empty holdout");
    std::vector<double> full(train);
    full.insert(full.end(), holdout.begin(), holdout.end());
    std::vector<double> w = difference(full, model.order.d);
    const bool centered = model.order.p + model.order.q > 0;
    std::vector<double> z(w.size());
    for (std::size_t t = 0; t < w.size(); ++t)
        z[t] = w[t] - (centered ? model.intercept : 0.0);
    std::vector<double> e;
    detail::css_residuals(z, model.ar, model.ma, e);
    const std::size_t m = std::max(model.ar.size(), model.ma.size());
    // w index t predicts original index t + d.
    const std::ptrdiff_t holdout_begin =
        static_cast<std::ptrdiff_t>(train.size()) - model.order.d;
    const std::size_t first =
        static_cast<std::size_t>(std::max<std::ptrdiff_t>(
            static_cast<std::ptrdiff_t>(m), std::max<std::ptrdiff_t>(holdout_begin, 0)));
    if (first >= e.size())
        throw std::invalid_argument("one_step_holdout_mse: holdout shorter than model memory");
    double acc = 0.0;
    for (std::size_t t = first; t < e.size(); ++t)
        acc += e[t] * e[t];
    return acc / static_cast<double>(e.size() - first);
}

struct GridEntry {
    FitReport report; // mse holds the holdout MSE
    ArimaModel model;
};

/// Fits every order on train, scores each by rolling one-step holdout MSE,
/// and ranks ascending. Ties break toward the smaller p+d+q, then
/// lexicographic (p,d,q). Orders that fail to fit are skipped; if all fail,
/// the error lists every per-order failure.
inline std::vector<GridEntry> grid_select(const std::vector<double>& train,
                                          const std::vector<double>& holdout,
                                          const std::vector<ArimaOrder>& orders,
                                          const FitOptions& options = {}) {
    if (orders.empty())
        throw std::invalid_argument("grid_select: empty order grid");
    std::vector<GridEntry> entries;
    std::string failures;
    for (const ArimaOrder& order : orders) {
        try {
            FitResult fit = fit_arima(train, order, options);
            GridEntry entry{fit.report, std::move(fit.model)};
            entry.report.mse = one_step_holdout_mse(entry.model, train, holdout);
            entries.push_back(std::move(entry));
        } catch (const std::exception& ex) {
            failures += (failures.empty() ? "" : "; ") + order.label() + ": " + ex.what();
        }
    }
    if (entries.empty())
        throw data_error("grid_select: all fits failed: " + failures);
    std::stable_sort(entries.begin(), entries.end(), [](const GridEntry& a, const GridEntry& b) {
        if (a.report.mse != b.report.mse)
            return a.report.mse < b.report.mse;
        const auto& x = a.report.order;
        const auto& y = b.report.order;
        if (x.p + x.d + x.q != y.p + y.d + y.q)
            return x.p + x.d + x.q < y.p + y.d + y.q;
        return std::tie(x.p, x.d, x.q) < std::tie(y.p, y.d, y.q);
    });
    return entries;
}

/// Ordinary least-squares line over the window, extrapolated and clamped at
/// zero. Comparison baseline, not part of the ARIMA family.
inline std::vector<double> linear_trend_baseline(const std::vector<double>& series,
                                                 int horizon) {
    const std::size_t n = series.size();
    if (n < 2)
        throw std::invalid_argument("linear_trend_baseline: need at least 2 points");
    if (horizon < 1)
        throw std::invalid_argument("linear_trend_baseline: horizon must be >= 1");
    const double mean_t = static_cast<double>(n - 1) / 2.0;
    double mean_y = 0.0;
    for (double v : series)
        mean_y += v;
    mean_y /= static_cast<double>(n);
    double cov = 0.0, var = 0.0;
    for (std::size_t t = 0; t < n; ++t) {
        const double dt = static_cast<double>(t) - mean_t;
        cov += dt * (series[t] - mean_y);
        var += dt * dt;
    }
    const double slope = cov / var;
    std::vector<double> out(static_cast<std::size_t>(horizon));
    for (int h = 0; h < horizon; ++h) {
        const double t = static_cast<double>(n) + static_cast<double>(h);
        out[static_cast<std::size_t>(h)] =
            std::max(0.0, mean_y + slope * (t - mean_t));
    }
    return out;
}

inline void to_json(nlohmann::json& j, const ArimaOrder& order) {
    j = nlohmann::json{{"p", order.p}, {"d", order.d}, {"q", order.q}};
}

inline void from_json(const nlohmann::json& j, ArimaOrder& order) {
    j.at("p").get_to(order.p);
    j.at("d").get_to(order.d);
    j.at("q").get_to(order.q);
}

inline void to_json(nlohmann::json& j, const ArimaModel& model) {
    j = nlohmann::json{{"schema", 1},
                       {"order", model.order},
                       {"ar", model.ar},
                       {"ma", model.ma},
                       {"intercept", model.intercept},
                       {"residual_variance", model.residual_variance},
                       {"tail_original", model.tail_original},
                       {"tail_values", model.tail_values},
                       {"tail_residuals", model.tail_residuals}};
}

inline void from_json(const nlohmann::json& j, ArimaModel& model) {
    if (j.at("schema").get<int>() != 1)
        throw data_error("ArimaModel: unsupported schema version");
    j.at("order").get_to(model.order);
    j.at("ar").get_to(model.ar);
    j.at("ma").get_to(model.ma);
    j.at("intercept").get_to(model.intercept);
    j.at("residual_variance").get_to(model.residual_variance);
    j.at("tail_original").get_to(model.tail_original);
    j.at("tail_values").get_to(model.tail_values);
    j.at("tail_residuals").get_to(model.tail_residuals);
}

inline void save_model(const std::string& path, const ArimaModel& model) {
    std::ofstream out(path, std::ios::binary);
    if (!out)
        throw data_error("cannot open model file for writing: " + path);
    out << nlohmann::json(model).dump(2) << '\n';
}

inline ArimaModel load_model(const std::string& path) {
    std::ifstream in(path, std::ios::binary);
    if (!in)
        throw data_error("cannot open model file: " + path);
    nlohmann::json j;
    try {
        in >> j;
        return j.get<ArimaModel>();
    } catch (const nlohmann::json::exception& ex) {
        throw data_error("malformed model file " + path + ": " + ex.what());
    }
}

} // namespace prescale
