#pragma once

#include "mvis/measures.hpp"

#include <functional>
#include <map>
#include <optional>
#include <span>
#include <string>
#include <vector>

namespace mvis {

using PointFn = std::function<double(double t, double x)>;
using KernelFn = std::function<double(double t, double x, double y)>;

/// One term f(t,x) g(t,y) of a separable interaction kernel.
struct KernelTerm {
    PointFn x_factor;
    PointFn x_factor_dx;
    PointFn y_factor;
};

/// Scalar McKean-Vlasov model with drift in kernel form
///     b(t, x, mu) = beta(t, x) + \int kappa(t, x, y) mu(dy)
/// and constant diffusion sigma.
struct ModelSpec {
    std::string name;
    PointFn beta;
    PointFn beta_dx;
    KernelFn kappa;
    KernelFn kappa_dx;
    KernelFn kappa_dy;
    double sigma = 1.0;
    /// When present, kappa(t,x,y) == sum_m x_factor_m(t,x) y_factor_m(t,y),
    /// which lets a whole cloud be reduced to a handful of aggregates.
    std::optional<std::vector<KernelTerm>> separable;
};

/// Terminal payoff G >= 0 together with the adjoint terminal value 2 G'/G.
struct Payoff {
    std::string name;
    std::function<double(double)> value;
    std::function<double(double)> log_value;
    std::function<double(double)> log_grad;
    std::map<std::string, double> params;
};

/// Throws DomainError if sigma is not positive or a function is missing.
void validate(const ModelSpec& model);

/// b(t, x, cloud); uses the separable reduction when available.
double drift(const ModelSpec& model, double t, double x, const WeightedCloud& cloud);

/// Same quantity by the direct O(N) sum over the cloud.
double drift_direct(const ModelSpec& model, double t, double x, const WeightedCloud& cloud);

/// Interaction with a fixed cloud at a fixed time, evaluated at many x.
/// For non-separable kernels the cloud is referenced, not copied, and must
/// outlive the MeanField.
class MeanField {
public:
    MeanField(const ModelSpec& model, double t, const WeightedCloud& cloud);

    /// b(t, x, mu) where beta sees `t` and the interaction is frozen at the
    /// construction time.
    double drift(double t, double x) const;
    /// d/dx b(t, x, mu) at fixed mu.
    double drift_dx(double t, double x) const;

private:
    const ModelSpec* model_;
    double t_frozen_;
    std::vector<double> aggregates_;
    std::span<const double> points_;
    std::span<const double> weights_;
    double normalizer_;
};

double payoff_eval(const Payoff& payoff, double x);
/// 2 G'(x) / G(x); throws DomainError("payoff vanishes; adjoint undefined")
/// where G(x) == 0.
double payoff_terminal_adjoint(const Payoff& payoff, double x);

using Params = std::map<std::string, double>;

/// Built-in models: "kuramoto" (K, sigma), "linear-ou" (sigma),
/// "linear-mean-field" (sigma).
ModelSpec make_model(const std::string& key, const Params& params);
/// Built-in payoffs: "exp" (a, b), "tanh" (a, b), "constant" (c).
Payoff make_payoff(const std::string& key, const Params& params);

ModelSpec kuramoto_model(double coupling, double sigma);
ModelSpec linear_ou_model(double sigma);
ModelSpec linear_mean_field_model(double sigma);
/// beta == kappa == 0; used for closed-form checks.
ModelSpec zero_drift_model(double sigma);

Payoff exp_payoff(double a, double b);
Payoff tanh_payoff(double a, double b);
Payoff constant_payoff(double c);

}  // namespace mvis
