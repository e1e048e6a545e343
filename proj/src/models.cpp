#include "mvis/models.hpp"

#include "mvis/errors.hpp"

#include <cmath>
#include <set>
#include <utility>

namespace mvis {

void validate(const ModelSpec& model) {
    if (!(model.sigma > 0.0) || !std::isfinite(model.sigma))
        throw ConfigError("model '" + model.name + "': sigma must be positive");
    if (!model.beta || !model.beta_dx || !model.kappa || !model.kappa_dx || !model.kappa_dy)
        throw ConfigError("model '" + model.name + "': drift functions and derivatives are required");
    if (model.separable)
        for (const auto& term : *model.separable)
            if (!term.x_factor || !term.x_factor_dx || !term.y_factor)
                throw ConfigError("model '" + model.name + "': incomplete separable kernel term");
}

namespace {

std::vector<double> separable_aggregates(const std::vector<KernelTerm>& terms, double t, const WeightedCloud& cloud) {
    std::vector<double> aggregates(terms.size(), 0.0);
    const auto points = cloud.points();
    const auto weights = cloud.weights();
    for (std::size_t m = 0; m < terms.size(); ++m) {
        double acc = 0.0;
        for (std::size_t j = 0; j < points.size(); ++j) acc += weights[j] * terms[m].y_factor(t, points[j]);
        aggregates[m] = acc / cloud.normalizer();
    }
    return aggregates;
}

}  // namespace

double drift(const ModelSpec& model, double t, double x, const WeightedCloud& cloud) {
    if (!model.separable) return drift_direct(model, t, x, cloud);
    const auto& terms = *model.separable;
    const auto aggregates = separable_aggregates(terms, t, cloud);
    double b = model.beta(t, x);
    for (std::size_t m = 0; m < terms.size(); ++m) b += terms[m].x_factor(t, x) * aggregates[m];
    return b;
}

double drift_direct(const ModelSpec& model, double t, double x, const WeightedCloud& cloud) {
    const auto points = cloud.points();
    const auto weights = cloud.weights();
    double acc = 0.0;
    for (std::size_t j = 0; j < points.size(); ++j) acc += weights[j] * model.kappa(t, x, points[j]);
    return model.beta(t, x) + acc / cloud.normalizer();
}

MeanField::MeanField(const ModelSpec& model, double t, const WeightedCloud& cloud)
    : model_(&model), t_frozen_(t), normalizer_(cloud.normalizer()) {
    if (model.separable) {
        aggregates_ = separable_aggregates(*model.separable, t, cloud);
    } else {
        points_ = cloud.points();
        weights_ = cloud.weights();
    }
}

double MeanField::drift(double t, double x) const {
    double b = model_->beta(t, x);
    if (model_->separable) {
        const auto& terms = *model_->separable;
        for (std::size_t m = 0; m < terms.size(); ++m) b += terms[m].x_factor(t_frozen_, x) * aggregates_[m];
        return b;
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < points_.size(); ++j) acc += weights_[j] * model_->kappa(t_frozen_, x, points_[j]);
    return b + acc / normalizer_;
}

double MeanField::drift_dx(double t, double x) const {
    double b = model_->beta_dx(t, x);
    if (model_->separable) {
        const auto& terms = *model_->separable;
        for (std::size_t m = 0; m < terms.size(); ++m) b += terms[m].x_factor_dx(t_frozen_, x) * aggregates_[m];
        return b;
    }
    double acc = 0.0;
    for (std::size_t j = 0; j < points_.size(); ++j)
        acc += weights_[j] * model_->kappa_dx(t_frozen_, x, points_[j]);
    return b + acc / normalizer_;
}

double payoff_eval(const Payoff& payoff, double x) { return payoff.value(x); }

double payoff_terminal_adjoint(const Payoff& payoff, double x) {
    if (payoff.value(x) == 0.0) throw DomainError("payoff vanishes; adjoint undefined");
    return payoff.log_grad(x);
}

ModelSpec kuramoto_model(double coupling, double sigma) {
    ModelSpec m;
    m.name = "kuramoto";
    m.sigma = sigma;
    m.beta = [](double, double x) { return -std::sin(x); };
    m.beta_dx = [](double, double x) { return -std::cos(x); };
    m.kappa = [coupling](double, double x, double y) { return coupling * std::sin(y - x); };
    m.kappa_dx = [coupling](double, double x, double y) { return -coupling * std::cos(y - x); };
    m.kappa_dy = [coupling](double, double x, double y) { return coupling * std::cos(y - x); };
    // K sin(y - x) = K cos x sin y - K sin x cos y
    m.separable = std::vector<KernelTerm>{
        {[coupling](double, double x) { return coupling * std::cos(x); },
         [coupling](double, double x) { return -coupling * std::sin(x); },
         [](double, double y) { return std::sin(y); }},
        {[coupling](double, double x) { return -coupling * std::sin(x); },
         [coupling](double, double x) { return -coupling * std::cos(x); },
         [](double, double y) { return std::cos(y); }},
    };
    return m;
}

namespace {

ModelSpec no_interaction(std::string name, double sigma) {
    ModelSpec m;
    m.name = std::move(name);
    m.sigma = sigma;
    m.kappa = [](double, double, double) { return 0.0; };
    m.kappa_dx = [](double, double, double) { return 0.0; };
    m.kappa_dy = [](double, double, double) { return 0.0; };
    m.separable = std::vector<KernelTerm>{};
    return m;
}

}  // namespace

ModelSpec linear_ou_model(double sigma) {
    ModelSpec m = no_interaction("linear-ou", sigma);
    m.beta = [](double, double x) { return -x; };
    m.beta_dx = [](double, double) { return -1.0; };
    return m;
}

ModelSpec linear_mean_field_model(double sigma) {
    // -(x - mean) written as beta = -x plus kernel kappa(x, y) = y.
    ModelSpec m;
    m.name = "linear-mean-field";
    m.sigma = sigma;
    m.beta = [](double, double x) { return -x; };
    m.beta_dx = [](double, double) { return -1.0; };
    m.kappa = [](double, double, double y) { return y; };
    m.kappa_dx = [](double, double, double) { return 0.0; };
    m.kappa_dy = [](double, double, double) { return 1.0; };
    m.separable = std::vector<KernelTerm>{
        {[](double, double) { return 1.0; }, [](double, double) { return 0.0; }, [](double, double y) { return y; }},
    };
    return m;
}

ModelSpec zero_drift_model(double sigma) {
    ModelSpec m = no_interaction("zero-drift", sigma);
    m.beta = [](double, double) { return 0.0; };
    m.beta_dx = [](double, double) { return 0.0; };
    return m;
}

Payoff exp_payoff(double a, double b) {
    if (!(a >= 0.0)) throw ConfigError("exp payoff requires a >= 0");
    Payoff p;
    p.name = "exp";
    p.params = {{"a", a}, {"b", b}};
    p.value = [a, b](double x) { return a * std::exp(b * x); };
    p.log_value = [a, b](double x) { return std::log(a) + b * x; };
    p.log_grad = [b](double) { return 2.0 * b; };
    return p;
}

Payoff tanh_payoff(double a, double b) {
    Payoff p;
    p.name = "tanh";
    p.params = {{"a", a}, {"b", b}};
    // (tanh z + 1)/2 == 1/(1 + e^{-2z}); the logistic form keeps precision
    // far in the left tail where tanh z + 1 cancels.
    p.value = [a, b](double x) {
        const double z = a * (x - b);
        return 1.0 / (1.0 + std::exp(-2.0 * z));
    };
    p.log_value = [a, b](double x) {
        const double u = -2.0 * a * (x - b);  // log G = -softplus(u)
        return u > 0.0 ? -(u + std::log1p(std::exp(-u))) : -std::log1p(std::exp(u));
    };
    // 2a(1 - tanh z) == 4a / (1 + e^{2z})
    p.log_grad = [a, b](double x) {
        const double z = a * (x - b);
        return 4.0 * a / (1.0 + std::exp(2.0 * z));
    };
    return p;
}

Payoff constant_payoff(double c) {
    if (!(c >= 0.0)) throw ConfigError("constant payoff requires c >= 0");
    Payoff p;
    p.name = "constant";
    p.params = {{"c", c}};
    p.value = [c](double) { return c; };
    p.log_value = [c](double) { return std::log(c); };
    p.log_grad = [](double) { return 0.0; };
    return p;
}

namespace {

double take(const Params& params, const std::string& key, double fallback) {
    const auto it = params.find(key);
    return it == params.end() ? fallback : it->second;
}

void reject_unknown(const Params& params, std::initializer_list<const char*> allowed, const std::string& what) {
    std::set<std::string> ok(allowed.begin(), allowed.end());
    for (const auto& [key, value] : params)
        if (!ok.count(key)) throw ConfigError("unknown parameter '" + key + "' for " + what);
}

}  // namespace

ModelSpec make_model(const std::string& key, const Params& params) {
    ModelSpec model;
    if (key == "kuramoto") {
        reject_unknown(params, {"K", "sigma"}, "model kuramoto");
        model = kuramoto_model(take(params, "K", 1.0), take(params, "sigma", 0.3));
    } else if (key == "linear-ou") {
        reject_unknown(params, {"sigma"}, "model linear-ou");
        model = linear_ou_model(take(params, "sigma", 0.3));
    } else if (key == "linear-mean-field") {
        reject_unknown(params, {"sigma"}, "model linear-mean-field");
        model = linear_mean_field_model(take(params, "sigma", 0.3));
    } else if (key == "zero-drift") {
        reject_unknown(params, {"sigma"}, "model zero-drift");
        model = zero_drift_model(take(params, "sigma", 0.3));
    } else {
        throw ConfigError("unknown model '" + key + "'");
    }
    validate(model);
    return model;
}

Payoff make_payoff(const std::string& key, const Params& params) {
    if (key == "exp") {
        reject_unknown(params, {"a", "b"}, "payoff exp");
        return exp_payoff(take(params, "a", 0.5), take(params, "b", 10.0));
    }
    if (key == "tanh") {
        reject_unknown(params, {"a", "b"}, "payoff tanh");
        return tanh_payoff(take(params, "a", 15.0), take(params, "b", 1.0));
    }
    if (key == "constant") {
        reject_unknown(params, {"c"}, "payoff constant");
        return constant_payoff(take(params, "c", 1.0));
    }
    throw ConfigError("unknown payoff '" + key + "'");
}

}  // namespace mvis
