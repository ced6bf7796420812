#pragma once

#include <cmath>
#include <cstdint>
#include <sstream>
#include <string>
#include <vector>

#include "splitmesh/errors.hpp"
#include "splitmesh/loss.hpp"
#include "splitmesh/model.hpp"
#include "splitmesh/rng.hpp"

namespace splitmesh {

struct GradCheckOptions {
    double h = 1e-5;
    double rel_tol = 1e-4;
    double abs_floor = 1e-7;  // |analytic - numeric| below this always passes
    std::size_t batch = 2;
    bool corrupt_sign = false;  // test hook: negates analytic grads so the checker must report failure
};

struct GradCheckReport {
    bool pass = true;
    double max_rel_err = 0.0;  // over elements exceeding the absolute floor
    std::size_t checked = 0;
    std::size_t failed = 0;
    std::string worst;
};

namespace detail {
inline void gc_record(GradCheckReport& rep, const GradCheckOptions& opt, const std::string& where,
                      std::size_t idx, double analytic, double numeric) {
    ++rep.checked;
    double diff = std::fabs(analytic - numeric);
    if (diff < opt.abs_floor) return;
    double denom = std::max(std::fabs(analytic), std::fabs(numeric));
    double rel = denom > 0.0 ? diff / denom : 0.0;
    if (rel > rep.max_rel_err) {
        rep.max_rel_err = rel;
        std::ostringstream os;
        os << where << "[" << idx << "] analytic=" << analytic << " numeric=" << numeric;
        rep.worst = os.str();
    }
    if (rel >= opt.rel_tol) {
        rep.pass = false;
        ++rep.failed;
    }
}
}  // namespace detail

// Central finite differences against the analytic backward pass, in 64-bit
// arithmetic, over every parameter element and every input element.
inline GradCheckReport grad_check(const ModelSpec& spec, std::uint64_t seed,
                                  GradCheckOptions opt = {}) {
    auto trace = validate_model(spec);
    SplitMix64 rng(seed);
    auto model = ModelT<double>::build(spec, rng);

    std::vector<std::size_t> in_shape{opt.batch};
    in_shape.insert(in_shape.end(), spec.input_shape.begin(), spec.input_shape.end());
    std::vector<std::size_t> out_shape{opt.batch};
    out_shape.insert(out_shape.end(), trace.back().begin(), trace.back().end());

    SplitMix64 data_rng(SplitMix64::finalize(seed ^ 0xA5A5A5A5A5A5A5A5ull));
    TensorD input(in_shape);
    for (auto& v : input.data) v = next_gaussian(data_rng);
    TensorD target(out_shape);
    if (spec.loss == LossKind::BCE) {
        for (auto& v : target.data) v = static_cast<double>(data_rng.next_u64() & 1);
    } else {
        for (auto& v : target.data) v = next_gaussian(data_rng);
    }

    std::size_t total = model.param_count() + input.size();
    if (total > 10000)
        throw ConfigError("grad_check capped at 10^4 elements, got " + std::to_string(total));

    auto loss_at = [&](const TensorD& x) {
        auto out = model.forward(x);
        return loss_forward(spec.loss, out, target).value;
    };

    model.zero_grads();
    auto out = model.forward(input);
    auto lr = loss_forward(spec.loss, out, target);
    TensorD input_grad = model.backward(lr.grad);
    auto param_grads = model.grads();
    std::vector<TensorD> analytic_params;
    for (auto* g : param_grads) analytic_params.push_back(*g);
    double sign = opt.corrupt_sign ? -1.0 : 1.0;

    GradCheckReport rep;
    auto params = model.params();
    for (std::size_t pi = 0; pi < params.size(); ++pi) {
        for (std::size_t i = 0; i < params[pi]->data.size(); ++i) {
            double saved = params[pi]->data[i];
            params[pi]->data[i] = saved + opt.h;
            double lp = loss_at(input);
            params[pi]->data[i] = saved - opt.h;
            double lm = loss_at(input);
            params[pi]->data[i] = saved;
            double numeric = (lp - lm) / (2.0 * opt.h);
            detail::gc_record(rep, opt, "param" + std::to_string(pi), i,
                              sign * analytic_params[pi].data[i], numeric);
        }
    }
    for (std::size_t i = 0; i < input.data.size(); ++i) {
        TensorD x = input;
        x.data[i] += opt.h;
        double lp = loss_at(x);
        x.data[i] -= 2.0 * opt.h;
        double lm = loss_at(x);
        double numeric = (lp - lm) / (2.0 * opt.h);
        detail::gc_record(rep, opt, "input", i, sign * input_grad.data[i], numeric);
    }
    return rep;
}

}  // namespace splitmesh
