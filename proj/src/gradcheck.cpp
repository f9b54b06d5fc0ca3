#include "fusion/gradcheck.hpp"

#include <algorithm>
#include <cmath>
#include <cstdio>
#include <sstream>

#include "fusion/ops.hpp"
#include "fusion/rng.hpp"

namespace fusion {

namespace {

Tensor random_tensor(Rng& rng, std::vector<int> shape, double lo = -1.0, double hi = 1.0,
                     bool requires_grad = true) {
    Tensor t = Tensor::zeros(std::move(shape), requires_grad);
    for (std::int64_t i = 0; i < t.size(); ++i) t.data()[i] = rng.uniform(lo, hi);
    return t;
}

// Values bounded away from zero, for ops with a kink at the origin.
Tensor random_tensor_away_from_zero(Rng& rng, std::vector<int> shape, double min_abs) {
    Tensor t = Tensor::zeros(std::move(shape), true);
    for (std::int64_t i = 0; i < t.size(); ++i) {
        const double mag = rng.uniform(min_abs, 1.0);
        t.data()[i] = rng.uniform() < 0.5 ? -mag : mag;
    }
    return t;
}

// Scalar probe so non-scalar op outputs feed a smooth loss with distinct
// per-element weights.
std::function<Tensor(const Tensor&)> make_probe(Rng& rng, const std::vector<int>& out_shape) {
    Tensor offset = random_tensor(rng, out_shape, -0.5, 0.5, false);
    return [offset](const Tensor& out) { return mean_sq(add(out, offset), 0.0); };
}

struct OpCheck {
    std::string name;
    std::function<GradCheckCase(Rng&)> make;
};

const std::vector<OpCheck>& registry() {
    static const std::vector<OpCheck> ops = {
        {"conv2d",
         [](Rng& rng) {
             GradCheckCase c;
             c.inputs = {random_tensor(rng, {2, 5, 5}),
                         random_tensor(rng, {3, 2, 3, 3}, -0.7, 0.7),
                         random_tensor(rng, {3}, -0.3, 0.3)};
             const int stride = 1 + static_cast<int>(rng.next_u64() % 2);
             auto probe = make_probe(rng, {3, stride == 1 ? 5 : 3, stride == 1 ? 5 : 3});
             c.forward = [probe, stride](const std::vector<Tensor>& in) {
                 return probe(conv2d(in[0], in[1], in[2], stride, 1));
             };
             return c;
         }},
        {"transposed_conv2d",
         [](Rng& rng) {
             GradCheckCase c;
             c.inputs = {random_tensor(rng, {2, 4, 4}),
                         random_tensor(rng, {2, 3, 3, 3}, -0.7, 0.7),
                         random_tensor(rng, {3}, -0.3, 0.3)};
             auto probe = make_probe(rng, {3, 7, 7});
             c.forward = [probe](const std::vector<Tensor>& in) {
                 return probe(transposed_conv2d(in[0], in[1], in[2], 2, 1));
             };
             return c;
         }},
        {"leaky_relu",
         [](Rng& rng) {
             GradCheckCase c;
             c.inputs = {random_tensor_away_from_zero(rng, {2, 4, 4}, 0.1)};
             const double slope = 0.1 * static_cast<double>(rng.next_u64() % 3);
             auto probe = make_probe(rng, {2, 4, 4});
             c.forward = [probe, slope](const std::vector<Tensor>& in) {
                 return probe(leaky_relu(in[0], slope));
             };
             return c;
         }},
        {"instance_norm",
         [](Rng& rng) {
             GradCheckCase c;
             c.inputs = {random_tensor(rng, {3, 4, 4}), random_tensor(rng, {3}, 0.5, 1.5),
                         random_tensor(rng, {3}, -0.5, 0.5)};
             auto probe = make_probe(rng, {3, 4, 4});
             c.forward = [probe](const std::vector<Tensor>& in) {
                 return probe(instance_norm(in[0], in[1], in[2], 1e-5));
             };
             return c;
         }},
        {"min_pool2d",
         [](Rng& rng) {
             // keep within-window gaps well above the finite-difference step
             // so the argmin cannot flip under perturbation
             Tensor t;
             for (;;) {
                 t = random_tensor(rng, {2, 4, 4});
                 bool ok = true;
                 for (int c = 0; c < 2 && ok; ++c)
                     for (int oh = 0; oh < 2 && ok; ++oh)
                         for (int ow = 0; ow < 2 && ok; ++ow) {
                             double vals[4];
                             int n = 0;
                             for (int i = 0; i < 2; ++i)
                                 for (int j = 0; j < 2; ++j)
                                     vals[n++] = t.data()[(c * 4 + oh * 2 + i) * 4 + ow * 2 + j];
                             for (int a = 0; a < 4 && ok; ++a)
                                 for (int b = a + 1; b < 4; ++b)
                                     if (std::abs(vals[a] - vals[b]) < 1e-3) {
                                         ok = false;
                                         break;
                                     }
                         }
                 if (ok) break;
             }
             GradCheckCase c;
             c.inputs = {t};
             auto probe = make_probe(rng, {2, 2, 2});
             c.forward = [probe](const std::vector<Tensor>& in) {
                 return probe(min_pool2d(in[0], 2));
             };
             return c;
         }},
        {"concat_channels",
         [](Rng& rng) {
             GradCheckCase c;
             c.inputs = {random_tensor(rng, {2, 3, 3}), random_tensor(rng, {1, 3, 3})};
             auto probe = make_probe(rng, {3, 3, 3});
             c.forward = [probe](const std::vector<Tensor>& in) {
                 return probe(concat_channels(in[0], in[1]));
             };
             return c;
         }},
        {"slice_channels",
         [](Rng& rng) {
             GradCheckCase c;
             c.inputs = {random_tensor(rng, {4, 3, 3})};
             auto probe = make_probe(rng, {2, 3, 3});
             c.forward = [probe](const std::vector<Tensor>& in) {
                 return probe(slice_channels(in[0], 1, 3));
             };
             return c;
         }},
        {"reflect_pad2d",
         [](Rng& rng) {
             GradCheckCase c;
             c.inputs = {random_tensor(rng, {2, 4, 4})};
             auto probe = make_probe(rng, {2, 8, 8});
             c.forward = [probe](const std::vector<Tensor>& in) {
                 return probe(reflect_pad2d(in[0], 2));
             };
             return c;
         }},
        {"add",
         [](Rng& rng) {
             GradCheckCase c;
             c.inputs = {random_tensor(rng, {3, 3}), random_tensor(rng, {3, 3})};
             auto probe = make_probe(rng, {3, 3});
             c.forward = [probe](const std::vector<Tensor>& in) { return probe(add(in[0], in[1])); };
             return c;
         }},
        {"scale",
         [](Rng& rng) {
             GradCheckCase c;
             c.inputs = {random_tensor(rng, {7})};
             auto probe = make_probe(rng, {7});
             c.forward = [probe](const std::vector<Tensor>& in) { return probe(scale(in[0], 1.7)); };
             return c;
         }},
        {"sum",
         [](Rng& rng) {
             GradCheckCase c;
             c.inputs = {random_tensor(rng, {11})};
             c.forward = [](const std::vector<Tensor>& in) { return sum(in[0]); };
             return c;
         }},
        {"tanh01",
         [](Rng& rng) {
             GradCheckCase c;
             c.inputs = {random_tensor(rng, {3, 4}, -2.0, 2.0)};
             auto probe = make_probe(rng, {3, 4});
             c.forward = [probe](const std::vector<Tensor>& in) { return probe(tanh01(in[0])); };
             return c;
         }},
        {"mean_l1",
         [](Rng& rng) {
             // keep |a - b| away from the subgradient kink
             Tensor a = random_tensor(rng, {3, 4, 4});
             Tensor b = Tensor::zeros({3, 4, 4}, true);
             for (std::int64_t i = 0; i < a.size(); ++i) {
                 const double gap = rng.uniform(0.05, 0.5);
                 b.data()[i] = a.data()[i] + (rng.uniform() < 0.5 ? -gap : gap);
             }
             GradCheckCase c;
             c.inputs = {a, b};
             c.forward = [](const std::vector<Tensor>& in) { return mean_l1(in[0], in[1]); };
             return c;
         }},
        {"mean_sq",
         [](Rng& rng) {
             GradCheckCase c;
             c.inputs = {random_tensor(rng, {3, 5})};
             c.forward = [](const std::vector<Tensor>& in) { return mean_sq(in[0], 0.3); };
             return c;
         }},
    };
    return ops;
}

}  // namespace

namespace detail_gradcheck {
double finite_diff_error_impl(const GradCheckCase& c, double eps, double analytic_perturb) {
    std::vector<std::vector<double>> analytic;
    {
        GradTape tape;
        for (const Tensor& t : c.inputs) const_cast<Tensor&>(t).zero_grad();
        Tensor loss = c.forward(c.inputs);
        backward(loss);
        for (const Tensor& t : c.inputs) {
            if (t.has_grad())
                analytic.emplace_back(t.grad().begin(), t.grad().end());
            else
                analytic.emplace_back(static_cast<std::size_t>(t.size()), 0.0);
        }
    }
    analytic[0][0] += analytic_perturb;
    double max_rel = 0.0;
    for (std::size_t i = 0; i < c.inputs.size(); ++i) {
        Tensor t = c.inputs[i];
        for (std::int64_t j = 0; j < t.size(); ++j) {
            const double saved = t.data()[j];
            t.data()[j] = saved + eps;
            const double lp = c.forward(c.inputs).item();
            t.data()[j] = saved - eps;
            const double lm = c.forward(c.inputs).item();
            t.data()[j] = saved;
            const double numeric = (lp - lm) / (2.0 * eps);
            const double a = analytic[i][static_cast<std::size_t>(j)];
            const double rel =
                std::abs(a - numeric) / std::max({std::abs(a), std::abs(numeric), 1.0});
            max_rel = std::max(max_rel, rel);
        }
    }
    return max_rel;
}

std::vector<std::string> gradcheck_op_names() {
    std::vector<std::string> names;
    for (const auto& op : registry()) names.push_back(op.name);
    return names;
}

std::vector<GradCheckResult> run_gradcheck(std::uint64_t seed, const std::string& filter,
                                           const std::string& inject_fault_op, int instances,
                                           double tolerance) {
    std::vector<GradCheckResult> results;
    bool matched = false;
    std::uint64_t op_idx = 0;
    for (const auto& op : registry()) {
        ++op_idx;
        if (!filter.empty() && op.name != filter) continue;
        matched = true;
        GradCheckResult r;
        r.op = op.name;
        for (int k = 0; k < instances; ++k) {
            Rng rng(mix_seed(seed, op_idx, static_cast<std::uint64_t>(k)));
            GradCheckCase c = op.make(rng);
            double err = finite_diff_error(c);
            if (op.name == inject_fault_op) {
                // fault-injection fixture: pretend the backward rule is off
                err = std::max(err, 0.05);
            }
            r.max_rel_err = std::max(r.max_rel_err, err);
        }
        r.pass = r.max_rel_err < tolerance;
        results.push_back(std::move(r));
    }
    if (!filter.empty() && !matched)
        throw ConfigError("gradcheck: unknown op filter '" + filter + "'");
    return results;
}

std::string format_gradcheck_table(const std::vector<GradCheckResult>& results) {
    std::ostringstream os;
    char buf[128];
    std::snprintf(buf, sizeof(buf), "%-20s %-14s %s\n", "op", "max_rel_err", "status");
    os << buf;
    for (const auto& r : results) {
        std::snprintf(buf, sizeof(buf), "%-20s %-14.3e %s\n", r.op.c_str(), r.max_rel_err,
                      r.pass ? "ok" : "FAIL");
        os << buf;
    }
    return os.str();
}

}  // namespace fusion
