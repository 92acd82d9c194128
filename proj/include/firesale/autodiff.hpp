#pragma once

#include <cstddef>
#include <functional>
#include <stdexcept>
#include <string>
#include <utility>
#include <vector>

#include "firesale/tensor.hpp"

namespace firesale {

/// Reverse-mode gradient tape over the handful of primitives an MLP needs.
///
/// Nodes are appended in evaluation order, so every node's parents precede
/// it and a single reverse sweep visits each node exactly once. Values are
/// row-major: a rank-2 value is a batch of row vectors, a rank-1 value is a
/// single row.
class Tape {
 public:
  using NodeId = std::size_t;

  /// Per-node gradient of a scalar loss. Nodes the loss does not depend on
  /// hold zeros of the node's shape.
  class Gradients {
   public:
    explicit Gradients(std::vector<Tensor> grads) : grads_(std::move(grads)) {}
    const Tensor& of(NodeId id) const { return grads_.at(id); }
    std::size_t size() const { return grads_.size(); }

   private:
    std::vector<Tensor> grads_;
  };

  NodeId constant(Tensor value) { return push(std::move(value), {}, {}, false); }
  NodeId parameter(Tensor value) { return push(std::move(value), {}, {}, true); }

  const Tensor& value(NodeId id) const { return nodes_.at(id).value; }
  bool is_parameter(NodeId id) const { return nodes_.at(id).is_parameter; }
  const std::vector<NodeId>& parents(NodeId id) const { return nodes_.at(id).parents; }
  std::size_t size() const { return nodes_.size(); }

  std::vector<NodeId> parameters() const {
    std::vector<NodeId> ids;
    for (NodeId i = 0; i < nodes_.size(); ++i) {
      if (nodes_[i].is_parameter) ids.push_back(i);
    }
    return ids;
  }

  /// y = x·Wᵀ + b
  NodeId affine(NodeId x, NodeId w, NodeId b) { return signed_affine(x, w, b, 1.0); }

  /// y = sign·(x·Wᵀ) + b. With sign = −1 the output is non-increasing in x
  /// whenever W is entrywise non-negative.
  NodeId signed_affine(NodeId x, NodeId w, NodeId b, double sign) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    const Tensor& bv = value(b);
    if (wv.rank() != 2) throw ShapeError("affine: weight must be a matrix, got " + wv.shape_string());
    if (xv.rank() < 1 || xv.rank() > 2 || xv.cols() != wv.cols()) {
      throw ShapeError("affine: input " + xv.shape_string() + " does not match weight " +
                       wv.shape_string());
    }
    if (bv.rank() != 1 || bv.size() != wv.rows()) {
      throw ShapeError("affine: bias " + bv.shape_string() + " does not match weight " +
                       wv.shape_string());
    }
    std::vector<std::size_t> shape =
        xv.rank() == 2 ? std::vector<std::size_t>{xv.rows(), wv.rows()}
                       : std::vector<std::size_t>{wv.rows()};
    Tensor out = Tensor::zeros(shape);
    auto y = out.as_matrix();
    y.noalias() = sign * (xv.as_matrix() * wv.as_matrix().transpose());
    y.rowwise() += bv.as_matrix().row(0);

    return push(std::move(out), {x, w, b},
                [sign](const Tape& tape, const std::vector<NodeId>& p, const Tensor& gy,
                       std::vector<Tensor>& grads) {
                  auto dy = gy.as_matrix();
                  const auto xm = tape.value(p[0]).as_matrix();
                  const auto wm = tape.value(p[1]).as_matrix();
                  grads[p[0]].as_matrix().noalias() += sign * (dy * wm);
                  grads[p[1]].as_matrix().noalias() += sign * (dy.transpose() * xm);
                  grads[p[2]].as_matrix().row(0) += dy.colwise().sum();
                });
  }

  /// Elementwise max{0, x}; the subgradient at exactly 0 is 0.
  NodeId relu(NodeId x) {
    Tensor out = value(x);
    for (double& v : out.values()) v = v > 0.0 ? v : 0.0;
    return push(std::move(out), {x},
                [](const Tape& tape, const std::vector<NodeId>& p, const Tensor& gy,
                   std::vector<Tensor>& grads) {
                  const Tensor& xv = tape.value(p[0]);
                  Tensor& gx = grads[p[0]];
                  for (std::size_t i = 0; i < xv.size(); ++i) {
                    if (xv[i] > 0.0) gx[i] += gy[i];
                  }
                });
  }

  NodeId add(NodeId a, NodeId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (av.shape() != bv.shape()) {
      throw ShapeError("add: " + av.shape_string() + " vs " + bv.shape_string());
    }
    Tensor out = av;
    for (std::size_t i = 0; i < out.size(); ++i) out[i] += bv[i];
    return push(std::move(out), {a, b},
                [](const Tape&, const std::vector<NodeId>& p, const Tensor& gy,
                   std::vector<Tensor>& grads) {
                  for (std::size_t i = 0; i < gy.size(); ++i) {
                    grads[p[0]][i] += gy[i];
                    grads[p[1]][i] += gy[i];
                  }
                });
  }

  NodeId negate(NodeId x) {
    Tensor out = value(x);
    for (double& v : out.values()) v = -v;
    return push(std::move(out), {x},
                [](const Tape&, const std::vector<NodeId>& p, const Tensor& gy,
                   std::vector<Tensor>& grads) {
                  Tensor& gx = grads[p[0]];
                  for (std::size_t i = 0; i < gy.size(); ++i) gx[i] -= gy[i];
                });
  }

  /// Column-wise concatenation of two values with the same row count.
  NodeId concat(NodeId a, NodeId b) {
    const Tensor& av = value(a);
    const Tensor& bv = value(b);
    if (av.rank() != bv.rank() || av.rows() != bv.rows() || av.rank() == 0) {
      throw ShapeError("concat: " + av.shape_string() + " and " + bv.shape_string() +
                       " do not share rows");
    }
    const std::size_t rows = av.rows();
    const std::size_t ca = av.cols();
    const std::size_t cb = bv.cols();
    std::vector<std::size_t> shape = av.rank() == 2 ? std::vector<std::size_t>{rows, ca + cb}
                                                    : std::vector<std::size_t>{ca + cb};
    Tensor out = Tensor::zeros(shape);
    out.as_matrix().leftCols(static_cast<Eigen::Index>(ca)) = av.as_matrix();
    out.as_matrix().rightCols(static_cast<Eigen::Index>(cb)) = bv.as_matrix();
    return push(std::move(out), {a, b},
                [ca, cb](const Tape&, const std::vector<NodeId>& p, const Tensor& gy,
                         std::vector<Tensor>& grads) {
                  auto dy = gy.as_matrix();
                  grads[p[0]].as_matrix() += dy.leftCols(static_cast<Eigen::Index>(ca));
                  grads[p[1]].as_matrix() += dy.rightCols(static_cast<Eigen::Index>(cb));
                });
  }

  /// y[·, i] = w[i]·x[·, i]
  NodeId scale_columns(NodeId x, NodeId w) {
    const Tensor& xv = value(x);
    const Tensor& wv = value(w);
    if (xv.rank() < 1 || xv.rank() > 2 || wv.rank() != 1 || wv.size() != xv.cols()) {
      throw ShapeError("scale_columns: " + xv.shape_string() + " by " + wv.shape_string());
    }
    Tensor out = xv;
    for (std::size_t r = 0; r < out.rows(); ++r) {
      for (std::size_t i = 0; i < out.cols(); ++i) out.at(r, i) *= wv[i];
    }
    return push(std::move(out), {x, w},
                [](const Tape& tape, const std::vector<NodeId>& p, const Tensor& gy,
                   std::vector<Tensor>& grads) {
                  const Tensor& xv2 = tape.value(p[0]);
                  const Tensor& wv2 = tape.value(p[1]);
                  for (std::size_t r = 0; r < gy.rows(); ++r) {
                    for (std::size_t i = 0; i < gy.cols(); ++i) {
                      grads[p[0]].at(r, i) += wv2[i] * gy.at(r, i);
                      grads[p[1]][i] += xv2.at(r, i) * gy.at(r, i);
                    }
                  }
                });
  }

  /// Repeats every column `copies` times in place:
  /// out[·, i·copies + k] = x[·, i].
  NodeId spread(NodeId x, std::size_t copies) {
    const Tensor& xv = value(x);
    if (xv.rank() < 1 || xv.rank() > 2 || copies == 0) throw ShapeError("spread: bad operand " + xv.shape_string());
    const std::size_t rows = xv.rows();
    const std::size_t cols = xv.cols();
    std::vector<std::size_t> shape = xv.rank() == 2 ? std::vector<std::size_t>{rows, cols * copies}
                                                    : std::vector<std::size_t>{cols * copies};
    Tensor out = Tensor::zeros(shape);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t i = 0; i < cols; ++i) {
        for (std::size_t k = 0; k < copies; ++k) out.at(r, i * copies + k) = xv.at(r, i);
      }
    }
    return push(std::move(out), {x},
                [copies](const Tape&, const std::vector<NodeId>& p, const Tensor& gy,
                         std::vector<Tensor>& grads) {
                  Tensor& gx = grads[p[0]];
                  for (std::size_t r = 0; r < gx.rows(); ++r) {
                    for (std::size_t i = 0; i < gx.cols(); ++i) {
                      for (std::size_t k = 0; k < copies; ++k) gx.at(r, i) += gy.at(r, i * copies + k);
                    }
                  }
                });
  }

  /// Holdings-weighted aggregation of per-bank liquidations:
  /// out[·, m] = Σ_n holdings[n, m] · ell_bar[·, n·M + m].
  /// The holdings enter as a fixed coefficient, never as a node.
  NodeId aggregate(NodeId ell_bar, const Tensor& holdings) {
    const Tensor& lv = value(ell_bar);
    if (holdings.rank() != 2) throw ShapeError("aggregate: holdings must be N×M");
    const std::size_t n_banks = holdings.rows();
    const std::size_t n_assets = holdings.cols();
    if (lv.rank() < 1 || lv.cols() != n_banks * n_assets) {
      throw ShapeError("aggregate: liquidations " + lv.shape_string() + " do not match holdings " +
                       holdings.shape_string());
    }
    const std::size_t rows = lv.rows();
    std::vector<std::size_t> shape = lv.rank() == 2 ? std::vector<std::size_t>{rows, n_assets}
                                                    : std::vector<std::size_t>{n_assets};
    Tensor out = Tensor::zeros(shape);
    for (std::size_t r = 0; r < rows; ++r) {
      for (std::size_t n = 0; n < n_banks; ++n) {
        for (std::size_t m = 0; m < n_assets; ++m) {
          out.at(r, m) += holdings.at(n, m) * lv.at(r, n * n_assets + m);
        }
      }
    }
    return push(std::move(out), {ell_bar},
                [holdings](const Tape&, const std::vector<NodeId>& p, const Tensor& gy,
                           std::vector<Tensor>& grads) {
                  Tensor& gl = grads[p[0]];
                  const std::size_t nb = holdings.rows();
                  const std::size_t na = holdings.cols();
                  for (std::size_t r = 0; r < gy.rows(); ++r) {
                    for (std::size_t n = 0; n < nb; ++n) {
                      for (std::size_t m = 0; m < na; ++m) {
                        gl.at(r, n * na + m) += holdings.at(n, m) * gy.at(r, m);
                      }
                    }
                  }
                });
  }

  /// Mean of squared differences over every entry; a scalar node.
  NodeId mse(NodeId pred, NodeId target) {
    const Tensor& pv = value(pred);
    const Tensor& tv = value(target);
    if (pv.shape() != tv.shape()) {
      throw ShapeError("mse: prediction " + pv.shape_string() + " vs target " + tv.shape_string());
    }
    if (pv.size() == 0) throw ShapeError("mse: empty operands");
    double sum = 0.0;
    for (std::size_t i = 0; i < pv.size(); ++i) {
      const double d = pv[i] - tv[i];
      sum += d * d;
    }
    const double count = static_cast<double>(pv.size());
    return push(Tensor::scalar(sum / count), {pred, target},
                [count](const Tape& tape, const std::vector<NodeId>& p, const Tensor& gy,
                        std::vector<Tensor>& grads) {
                  const Tensor& pv2 = tape.value(p[0]);
                  const Tensor& tv2 = tape.value(p[1]);
                  const double scale = 2.0 * gy[0] / count;
                  for (std::size_t i = 0; i < pv2.size(); ++i) {
                    const double d = scale * (pv2[i] - tv2[i]);
                    grads[p[0]][i] += d;
                    grads[p[1]][i] -= d;
                  }
                });
  }

  /// Gradient of a scalar node with respect to every node on the tape.
  Gradients backward(NodeId loss) const {
    if (loss >= nodes_.size()) throw std::out_of_range("backward: unknown node");
    if (value(loss).size() != 1) {
      throw ShapeError("backward: loss must be scalar, got " + value(loss).shape_string());
    }
    std::vector<Tensor> grads;
    grads.reserve(nodes_.size());
    for (const auto& node : nodes_) grads.push_back(Tensor::zeros(node.value.shape()));
    grads[loss][0] = 1.0;
    for (NodeId i = loss + 1; i-- > 0;) {
      const Node& node = nodes_[i];
      if (node.backward) node.backward(*this, node.parents, grads[i], grads);
    }
    return Gradients(std::move(grads));
  }

 private:
  using BackwardFn = std::function<void(const Tape&, const std::vector<NodeId>&, const Tensor&,
                                        std::vector<Tensor>&)>;

  struct Node {
    Tensor value;
    std::vector<NodeId> parents;
    BackwardFn backward;
    bool is_parameter = false;
  };

  NodeId push(Tensor value, std::vector<NodeId> parents, BackwardFn backward,
              bool is_parameter = false) {
    nodes_.push_back(Node{std::move(value), std::move(parents), std::move(backward), is_parameter});
    return nodes_.size() - 1;
  }

  std::vector<Node> nodes_;
};

}  // namespace firesale
