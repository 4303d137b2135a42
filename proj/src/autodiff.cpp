#include "sketchgnn/autodiff.hpp"

#include "sketchgnn/errors.hpp"

#include <Eigen/Core>

#include <algorithm>
#include <cmath>
#include <limits>
#include <numeric>
#include <random>

namespace sketchgnn {

namespace {

const char* kModule = "numerics";

using RowMatrix = Eigen::Matrix<double, Eigen::Dynamic, Eigen::Dynamic, Eigen::RowMajor>;
using MatrixMap = Eigen::Map<RowMatrix>;
using ConstMatrixMap = Eigen::Map<const RowMatrix>;

MatrixMap as_matrix(Tensor& t) {
    return {t.data().data(), static_cast<Eigen::Index>(t.rows()),
            static_cast<Eigen::Index>(t.cols())};
}

ConstMatrixMap as_matrix(const Tensor& t) {
    return {t.data().data(), static_cast<Eigen::Index>(t.rows()),
            static_cast<Eigen::Index>(t.cols())};
}

void require_rank2(const Tensor& t, const char* what) {
    if (t.rank() != 2)
        throw ShapeError(kModule, std::string(what) + " must be rank 2, got " +
                                      shape_string(t.shape()));
}

void check_index(int i, std::size_t bound, const char* what) {
    if (i < 0 || static_cast<std::size_t>(i) >= bound)
        throw InvalidArgument(kModule, std::string(what) + " index " + std::to_string(i) +
                                           " outside [0, " + std::to_string(bound) + ")");
}

Tape& tape_of(Var v) {
    if (v.tape == nullptr)
        throw InvalidArgument(kModule, "variable is not attached to a tape");
    return *v.tape;
}

void same_tape(Var a, Var b) {
    if (a.tape != b.tape)
        throw InvalidArgument(kModule, "operands live on different tapes");
}

} // namespace

const Tensor& Var::value() const { return tape_of(*this).value(id); }
const Tensor& Var::grad() const { return tape_of(*this).grad(id); }

Var Tape::leaf(Tensor value, bool requires_grad) {
    if (!value.all_finite())
        throw NumericsError(kModule, "non-finite value in leaf tensor");
    nodes_.push_back(Node{std::move(value), {}, {}, {}, requires_grad});
    return {this, nodes_.size() - 1};
}

Var Tape::record(Tensor value, std::vector<std::size_t> parents, Backward backward) {
    if (!value.all_finite())
        throw NumericsError(kModule, "forward pass produced a non-finite value");
    bool needs = std::any_of(parents.begin(), parents.end(),
                             [&](std::size_t p) { return nodes_[p].requires_grad; });
    nodes_.push_back(Node{std::move(value), {}, std::move(parents),
                          needs ? std::move(backward) : Backward{}, needs});
    return {this, nodes_.size() - 1};
}

const Tensor& Tape::grad(std::size_t id) const {
    return nodes_[id].grad;
}

Tensor& Tape::grad_buffer(std::size_t id) {
    auto& node = nodes_[id];
    if (node.grad.shape() != node.value.shape())
        node.grad = Tensor(node.value.shape(), 0.0);
    return node.grad;
}

void Tape::backward(Var root, double seed) {
    if (root.tape != this)
        throw InvalidArgument(kModule, "backward root belongs to another tape");
    if (nodes_[root.id].value.size() != 1)
        throw ShapeError(kModule, "backward root must hold a single element, got " +
                                      shape_string(nodes_[root.id].value.shape()));
    grad_buffer(root.id)[0] += seed;
    for (std::size_t id = root.id + 1; id-- > 0;) {
        auto& node = nodes_[id];
        if (!node.backward || node.grad.size() == 0)
            continue;
        if (!node.grad.all_finite())
            throw NumericsError(kModule, "backward pass produced a non-finite gradient");
        // The closure may grow parent buffers, which never reallocates nodes_.
        const Tensor& g = node.grad;
        node.backward(*this, g);
    }
}

Var linear(Var input, Var weight, Var bias) {
    same_tape(input, weight);
    same_tape(input, bias);
    Tape& tape = tape_of(input);
    const Tensor& x = input.value();
    const Tensor& w = weight.value();
    const Tensor& b = bias.value();
    require_rank2(x, "linear input");
    require_rank2(w, "linear weight");
    if (x.cols() != w.rows() || b.rank() != 1 || b.size() != w.cols())
        throw ShapeError(kModule, "linear: input " + shape_string(x.shape()) + ", weight " +
                                      shape_string(w.shape()) + ", bias " +
                                      shape_string(b.shape()));
    Tensor out({x.rows(), w.cols()});
    auto o = as_matrix(out);
    o.noalias() = as_matrix(x) * as_matrix(w);
    const auto bias_row = Eigen::Map<const Eigen::RowVectorXd>(b.data().data(),
                                                               static_cast<Eigen::Index>(b.size()));
    o.rowwise() += bias_row;

    const std::size_t xi = input.id, wi = weight.id, bi = bias.id;
    return tape.record(std::move(out), {xi, wi, bi}, [xi, wi, bi](Tape& t, const Tensor& g) {
        auto gm = as_matrix(g);
        if (t.requires_grad(xi))
            as_matrix(t.grad_buffer(xi)).noalias() += gm * as_matrix(t.value(wi)).transpose();
        if (t.requires_grad(wi))
            as_matrix(t.grad_buffer(wi)).noalias() += as_matrix(t.value(xi)).transpose() * gm;
        if (t.requires_grad(bi)) {
            Tensor& gb = t.grad_buffer(bi);
            for (std::size_t r = 0; r < g.rows(); ++r)
                for (std::size_t c = 0; c < g.cols(); ++c)
                    gb[c] += g.at(r, c);
        }
    });
}

Var relu(Var input) {
    Tape& tape = tape_of(input);
    const Tensor& x = input.value();
    Tensor out(x.shape());
    for (std::size_t i = 0; i < x.size(); ++i)
        out[i] = x[i] > 0.0 ? x[i] : 0.0;
    const std::size_t xi = input.id;
    return tape.record(std::move(out), {xi}, [xi](Tape& t, const Tensor& g) {
        const Tensor& x = t.value(xi);
        Tensor& gx = t.grad_buffer(xi);
        for (std::size_t i = 0; i < x.size(); ++i)
            if (x[i] > 0.0)
                gx[i] += g[i];
    });
}

Var add(Var a, Var b) {
    same_tape(a, b);
    Tape& tape = tape_of(a);
    if (a.value().shape() != b.value().shape())
        throw ShapeError(kModule, "add: " + shape_string(a.value().shape()) + " vs " +
                                      shape_string(b.value().shape()));
    Tensor out = a.value();
    const Tensor& y = b.value();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] += y[i];
    const std::size_t ai = a.id, bi = b.id;
    return tape.record(std::move(out), {ai, bi}, [ai, bi](Tape& t, const Tensor& g) {
        for (std::size_t id : {ai, bi}) {
            if (!t.requires_grad(id))
                continue;
            Tensor& gx = t.grad_buffer(id);
            for (std::size_t i = 0; i < g.size(); ++i)
                gx[i] += g[i];
        }
    });
}

Var mul(Var a, Var b) {
    same_tape(a, b);
    Tape& tape = tape_of(a);
    if (a.value().shape() != b.value().shape())
        throw ShapeError(kModule, "mul: " + shape_string(a.value().shape()) + " vs " +
                                      shape_string(b.value().shape()));
    Tensor out = a.value();
    const Tensor& y = b.value();
    for (std::size_t i = 0; i < out.size(); ++i)
        out[i] *= y[i];
    const std::size_t ai = a.id, bi = b.id;
    return tape.record(std::move(out), {ai, bi}, [ai, bi](Tape& t, const Tensor& g) {
        if (t.requires_grad(ai)) {
            Tensor& ga = t.grad_buffer(ai);
            const Tensor& y = t.value(bi);
            for (std::size_t i = 0; i < g.size(); ++i)
                ga[i] += g[i] * y[i];
        }
        if (t.requires_grad(bi)) {
            Tensor& gb = t.grad_buffer(bi);
            const Tensor& x = t.value(ai);
            for (std::size_t i = 0; i < g.size(); ++i)
                gb[i] += g[i] * x[i];
        }
    });
}

Var sum(Var input) {
    Tape& tape = tape_of(input);
    const auto d = input.value().data();
    const double total = std::accumulate(d.begin(), d.end(), 0.0);
    const std::size_t xi = input.id;
    return tape.record(Tensor::scalar(total), {xi}, [xi](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad_buffer(xi);
        for (std::size_t i = 0; i < gx.size(); ++i)
            gx[i] += g[0];
    });
}

Var max_aggregate(Var edge_values, std::span<const int> dst, std::size_t node_count) {
    Tape& tape = tape_of(edge_values);
    const Tensor& v = edge_values.value();
    require_rank2(v, "max_aggregate values");
    if (dst.size() != v.rows())
        throw ShapeError(kModule, "max_aggregate: " + std::to_string(dst.size()) +
                                      " destinations for " + std::to_string(v.rows()) + " rows");
    const std::size_t c = v.cols();
    Tensor out({node_count, c}, -std::numeric_limits<double>::infinity());
    // argmax[node * c + ch] = winning edge row
    std::vector<std::size_t> argmax(node_count * c, std::numeric_limits<std::size_t>::max());
    for (std::size_t e = 0; e < dst.size(); ++e) {
        check_index(dst[e], node_count, "max_aggregate destination");
        const auto node = static_cast<std::size_t>(dst[e]);
        const double* row = v.row(e);
        double* o = out.row(node);
        std::size_t* arg = argmax.data() + node * c;
        for (std::size_t ch = 0; ch < c; ++ch) {
            // Strict comparison keeps the first edge on ties.
            if (arg[ch] == std::numeric_limits<std::size_t>::max() || row[ch] > o[ch]) {
                o[ch] = row[ch];
                arg[ch] = e;
            }
        }
    }
    for (std::size_t node = 0; node < node_count; ++node) {
        if (c > 0 && argmax[node * c] == std::numeric_limits<std::size_t>::max())
            throw AggregationError(kModule, "node " + std::to_string(node) + " has no in-edges");
    }
    const std::size_t vi = edge_values.id;
    return tape.record(std::move(out), {vi},
                       [vi, c, argmax = std::move(argmax)](Tape& t, const Tensor& g) {
                           Tensor& gv = t.grad_buffer(vi);
                           for (std::size_t k = 0; k < argmax.size(); ++k)
                               gv[argmax[k] * c + k % c] += g[k];
                       });
}

Var concat(std::span<const Var> parts) {
    if (parts.empty())
        throw InvalidArgument(kModule, "concat of zero tensors");
    Tape& tape = tape_of(parts[0]);
    const std::size_t rows = parts[0].value().rows();
    std::size_t width = 0;
    std::vector<std::size_t> ids;
    std::vector<std::size_t> offsets;
    for (const auto& p : parts) {
        same_tape(parts[0], p);
        require_rank2(p.value(), "concat part");
        if (p.value().rows() != rows)
            throw ShapeError(kModule, "concat: row mismatch " + std::to_string(p.value().rows()) +
                                          " vs " + std::to_string(rows));
        ids.push_back(p.id);
        offsets.push_back(width);
        width += p.value().cols();
    }
    Tensor out({rows, width});
    for (std::size_t k = 0; k < parts.size(); ++k) {
        const Tensor& p = parts[k].value();
        for (std::size_t r = 0; r < rows; ++r)
            std::copy_n(p.row(r), p.cols(), out.row(r) + offsets[k]);
    }
    return tape.record(std::move(out), ids, [ids, offsets](Tape& t, const Tensor& g) {
        for (std::size_t k = 0; k < ids.size(); ++k) {
            if (!t.requires_grad(ids[k]))
                continue;
            Tensor& gp = t.grad_buffer(ids[k]);
            for (std::size_t r = 0; r < gp.rows(); ++r) {
                const double* src = g.row(r) + offsets[k];
                double* dst = gp.row(r);
                for (std::size_t ch = 0; ch < gp.cols(); ++ch)
                    dst[ch] += src[ch];
            }
        }
    });
}

Var concat(std::initializer_list<Var> parts) {
    return concat(std::span<const Var>(parts.begin(), parts.size()));
}

Var gather_rows(Var input, std::span<const int> index) {
    Tape& tape = tape_of(input);
    const Tensor& x = input.value();
    require_rank2(x, "gather_rows input");
    const std::size_t c = x.cols();
    Tensor out({index.size(), c});
    for (std::size_t r = 0; r < index.size(); ++r) {
        check_index(index[r], x.rows(), "gather_rows");
        std::copy_n(x.row(static_cast<std::size_t>(index[r])), c, out.row(r));
    }
    const std::size_t xi = input.id;
    std::vector<int> idx(index.begin(), index.end());
    return tape.record(std::move(out), {xi}, [xi, c, idx = std::move(idx)](Tape& t, const Tensor& g) {
        Tensor& gx = t.grad_buffer(xi);
        for (std::size_t r = 0; r < idx.size(); ++r) {
            double* dst = gx.row(static_cast<std::size_t>(idx[r]));
            const double* src = g.row(r);
            for (std::size_t ch = 0; ch < c; ++ch)
                dst[ch] += src[ch];
        }
    });
}

Var edge_features(Var features, std::span<const Edge> edges) {
    Tape& tape = tape_of(features);
    const Tensor& f = features.value();
    require_rank2(f, "edge_features input");
    const std::size_t d = f.cols();
    Tensor out({edges.size(), 2 * d});
    for (std::size_t e = 0; e < edges.size(); ++e) {
        check_index(edges[e].src, f.rows(), "edge source");
        check_index(edges[e].dst, f.rows(), "edge destination");
        const double* fi = f.row(static_cast<std::size_t>(edges[e].dst));
        const double* fj = f.row(static_cast<std::size_t>(edges[e].src));
        double* o = out.row(e);
        for (std::size_t ch = 0; ch < d; ++ch) {
            o[ch] = fi[ch];
            o[d + ch] = fj[ch] - fi[ch];
        }
    }
    const std::size_t fid = features.id;
    std::vector<Edge> list(edges.begin(), edges.end());
    return tape.record(std::move(out), {fid},
                       [fid, d, list = std::move(list)](Tape& t, const Tensor& g) {
                           Tensor& gf = t.grad_buffer(fid);
                           for (std::size_t e = 0; e < list.size(); ++e) {
                               double* gi = gf.row(static_cast<std::size_t>(list[e].dst));
                               double* gj = gf.row(static_cast<std::size_t>(list[e].src));
                               const double* ge = g.row(e);
                               for (std::size_t ch = 0; ch < d; ++ch) {
                                   gi[ch] += ge[ch] - ge[d + ch];
                                   gj[ch] += ge[d + ch];
                               }
                           }
                       });
}

Var edge_linear(Var features, std::span<const Edge> edges, Var weight, Var bias) {
    same_tape(features, weight);
    same_tape(features, bias);
    Tape& tape = tape_of(features);
    const Tensor& f = features.value();
    const Tensor& w = weight.value();
    const Tensor& b = bias.value();
    require_rank2(f, "edge_linear input");
    require_rank2(w, "edge_linear weight");
    const std::size_t n = f.rows();
    const std::size_t d = f.cols();
    const std::size_t width = w.cols();
    if (w.rows() != 2 * d || b.rank() != 1 || b.size() != width)
        throw ShapeError(kModule, "edge_linear: features " + shape_string(f.shape()) +
                                      ", weight " + shape_string(w.shape()) + ", bias " +
                                      shape_string(b.shape()));
    for (const auto& e : edges) {
        check_index(e.src, n, "edge source");
        check_index(e.dst, n, "edge destination");
    }

    // concat(f_i, f_j - f_i) W = f_i (W_top - W_bottom) + f_j W_bottom
    const auto wm = as_matrix(w);
    const auto d_rows = static_cast<Eigen::Index>(d);
    RowMatrix self_part = as_matrix(f) * (wm.topRows(d_rows) - wm.bottomRows(d_rows));
    RowMatrix nbr_part = as_matrix(f) * wm.bottomRows(d_rows);

    Tensor out({edges.size(), width});
    for (std::size_t e = 0; e < edges.size(); ++e) {
        const double* si = self_part.data() + static_cast<std::size_t>(edges[e].dst) * width;
        const double* nj = nbr_part.data() + static_cast<std::size_t>(edges[e].src) * width;
        double* o = out.row(e);
        for (std::size_t ch = 0; ch < width; ++ch)
            o[ch] = si[ch] + nj[ch] + b[ch];
    }

    const std::size_t fid = features.id, wid = weight.id, bid = bias.id;
    std::vector<Edge> list(edges.begin(), edges.end());
    return tape.record(
        std::move(out), {fid, wid, bid},
        [fid, wid, bid, n, d, width, list = std::move(list)](Tape& t, const Tensor& g) {
            // Scatter edge gradients back to node-level products.
            RowMatrix g_self = RowMatrix::Zero(static_cast<Eigen::Index>(n),
                                               static_cast<Eigen::Index>(width));
            RowMatrix g_nbr = g_self;
            for (std::size_t e = 0; e < list.size(); ++e) {
                const double* ge = g.row(e);
                double* gs = g_self.data() + static_cast<std::size_t>(list[e].dst) * width;
                double* gn = g_nbr.data() + static_cast<std::size_t>(list[e].src) * width;
                for (std::size_t ch = 0; ch < width; ++ch) {
                    gs[ch] += ge[ch];
                    gn[ch] += ge[ch];
                }
            }
            const auto d_rows = static_cast<Eigen::Index>(d);
            if (t.requires_grad(fid)) {
                const auto wm = as_matrix(t.value(wid));
                as_matrix(t.grad_buffer(fid)).noalias() +=
                    g_self * (wm.topRows(d_rows) - wm.bottomRows(d_rows)).transpose() +
                    g_nbr * wm.bottomRows(d_rows).transpose();
            }
            if (t.requires_grad(wid)) {
                const auto fm = as_matrix(t.value(fid));
                const RowMatrix top = fm.transpose() * g_self;
                auto gw = as_matrix(t.grad_buffer(wid));
                gw.topRows(d_rows) += top;
                gw.bottomRows(d_rows).noalias() += fm.transpose() * g_nbr - top;
            }
            if (t.requires_grad(bid)) {
                Tensor& gb = t.grad_buffer(bid);
                for (std::size_t e = 0; e < list.size(); ++e)
                    for (std::size_t ch = 0; ch < width; ++ch)
                        gb[ch] += g.at(e, ch);
            }
        });
}

Var cross_entropy(Var logits, std::span<const int> targets) {
    Tape& tape = tape_of(logits);
    const Tensor& z = logits.value();
    require_rank2(z, "cross_entropy logits");
    const std::size_t n = z.rows();
    const std::size_t classes = z.cols();
    if (targets.size() != n)
        throw ShapeError(kModule, "cross_entropy: " + std::to_string(targets.size()) +
                                      " targets for " + std::to_string(n) + " rows");
    if (n == 0)
        throw InvalidArgument(kModule, "cross_entropy over zero rows");
    for (int t : targets)
        check_index(t, classes, "cross_entropy target");

    Tensor softmax({n, classes});
    double loss = 0.0;
    for (std::size_t r = 0; r < n; ++r) {
        const double* row = z.row(r);
        const double m = *std::max_element(row, row + classes);
        double denom = 0.0;
        for (std::size_t c = 0; c < classes; ++c)
            denom += std::exp(row[c] - m);
        const double log_denom = std::log(denom);
        for (std::size_t c = 0; c < classes; ++c)
            softmax.at(r, c) = std::exp(row[c] - m - log_denom);
        loss += log_denom - (row[static_cast<std::size_t>(targets[r])] - m);
    }
    loss /= static_cast<double>(n);

    const std::size_t zi = logits.id;
    std::vector<int> tgt(targets.begin(), targets.end());
    return tape.record(Tensor::scalar(loss), {zi},
                       [zi, softmax = std::move(softmax), tgt = std::move(tgt)](Tape& t,
                                                                                const Tensor& g) {
                           Tensor& gz = t.grad_buffer(zi);
                           const double scale = g[0] / static_cast<double>(tgt.size());
                           for (std::size_t r = 0; r < tgt.size(); ++r) {
                               for (std::size_t c = 0; c < softmax.cols(); ++c) {
                                   const double onehot =
                                       static_cast<int>(c) == tgt[r] ? 1.0 : 0.0;
                                   gz.at(r, c) += scale * (softmax.at(r, c) - onehot);
                               }
                           }
                       });
}

GradCheckResult gradient_check(const ScalarFunction& f, std::span<const Tensor> params,
                               const GradCheckOptions& opts) {
    auto evaluate = [&](std::span<const Tensor> values) {
        Tape tape;
        std::vector<Var> vars;
        for (const auto& p : values)
            vars.push_back(tape.constant(p));
        const double v = f(tape, vars).value()[0];
        if (!std::isfinite(v))
            throw NumericsError(kModule, "gradient check: non-finite function value");
        return v;
    };

    Tape tape;
    std::vector<Var> vars;
    for (const auto& p : params)
        vars.push_back(tape.leaf(p));
    Var out = f(tape, vars);
    tape.backward(out);

    std::vector<std::pair<std::size_t, std::size_t>> coords;
    for (std::size_t k = 0; k < params.size(); ++k)
        for (std::size_t i = 0; i < params[k].size(); ++i)
            coords.emplace_back(k, i);
    if (coords.size() > opts.max_coords) {
        std::mt19937_64 rng(opts.seed);
        std::shuffle(coords.begin(), coords.end(), rng);
        coords.resize(opts.max_coords);
    }

    std::vector<Tensor> probe(params.begin(), params.end());
    GradCheckResult result;
    for (auto [k, i] : coords) {
        const Tensor& g = vars[k].grad();
        const double analytic = g.size() == 0 ? 0.0 : g[i];
        const double original = probe[k][i];
        probe[k][i] = original + opts.step;
        const double up = evaluate(probe);
        probe[k][i] = original - opts.step;
        const double down = evaluate(probe);
        probe[k][i] = original;
        const double numeric = (up - down) / (2 * opts.step);
        const double err = std::abs(analytic - numeric) / std::max(1.0, std::abs(numeric));
        result.max_rel_error = std::max(result.max_rel_error, err);
        ++result.coords_checked;
    }
    return result;
}

} // namespace sketchgnn
