#pragma once

// Reverse-mode differentiation over dense Eigen matrices.
//
// A tape records every primitive in insertion order. Each node owns its
// forward value (or references externally owned parameter storage) and a
// backward rule that pushes its gradient into its parents. The tape is
// rebuilt for every training step; nothing is compiled or cached.

#include "esdrnn/errors.hpp"

#include <Eigen/Dense>

#include <algorithm>
#include <cmath>
#include <cstddef>
#include <cstdint>
#include <functional>
#include <initializer_list>
#include <random>
#include <span>
#include <sstream>
#include <string>
#include <string_view>
#include <utility>
#include <vector>

namespace esdrnn::ad {

template <typename Scalar>
class BasicTape;

/// Handle to a node on a tape. Cheap to copy; valid until the tape is cleared.
template <typename Scalar>
struct BasicVar {
	BasicTape<Scalar> *tape = nullptr;
	std::size_t id = 0;

	const auto &value() const {
		return tape->value(id);
	}
	Eigen::Index rows() const {
		return value().rows();
	}
	Eigen::Index cols() const {
		return value().cols();
	}
	Scalar scalar() const {
		return value()(0, 0);
	}
};

namespace detail {

inline std::string shape_string(Eigen::Index rows, Eigen::Index cols) {
	std::ostringstream os;
	os << rows << "x" << cols;
	return os.str();
}

} // namespace detail

template <typename Scalar>
class BasicTape {
public:
	using Matrix = Eigen::Matrix<Scalar, Eigen::Dynamic, Eigen::Dynamic>;
	using Var = BasicVar<Scalar>;
	using BackwardRule = std::function<void(BasicTape &, std::size_t)>;

	BasicTape() = default;
	BasicTape(const BasicTape &) = delete;
	BasicTape &operator=(const BasicTape &) = delete;

	/// Leaf bound to external storage (a model parameter). The storage must
	/// outlive the tape and stay unmodified until backward() has run.
	Var leaf(const Matrix &bound) {
		Node node;
		node.bound = &bound;
		node.requires_grad = true;
		node.is_leaf = true;
		node.op = "leaf";
		check_finite(bound, node.op);
		return push(std::move(node));
	}

	/// Leaf owning its value.
	Var variable(Matrix value) {
		Node node;
		node.owned = std::move(value);
		node.requires_grad = true;
		node.is_leaf = true;
		node.op = "variable";
		check_finite(node.owned, node.op);
		return push(std::move(node));
	}

	Var constant(Matrix value) {
		Node node;
		node.owned = std::move(value);
		node.op = "constant";
		check_finite(node.owned, node.op);
		return push(std::move(node));
	}

	Var constant(Scalar value) {
		return constant(Matrix::Constant(1, 1, value));
	}

	/// Records a derived node. The rule receives the tape and the node id and
	/// must accumulate into the parents' gradients via accumulate().
	Var record(Matrix value, std::initializer_list<Var> parents, BackwardRule rule, const char *op) {
		return record(std::move(value), std::vector<Var>(parents), std::move(rule), op);
	}

	Var record(Matrix value, const std::vector<Var> &parents, BackwardRule rule, const char *op) {
		check_finite(value, op);
		Node node;
		node.owned = std::move(value);
		node.op = op;
		node.parents.reserve(parents.size());
		for (const auto &p : parents) {
			node.parents.push_back(p.id);
			node.requires_grad = node.requires_grad || nodes_[p.id].requires_grad;
		}
		if (node.requires_grad) {
			node.rule = std::move(rule);
		}
		return push(std::move(node));
	}

	const Matrix &value(std::size_t id) const {
		const Node &n = nodes_[id];
		return n.bound ? *n.bound : n.owned;
	}

	bool requires_grad(std::size_t id) const {
		return nodes_[id].requires_grad;
	}

	/// Gradient accumulator of a node, zero-initialised on first touch.
	Matrix &accumulate(std::size_t id) {
		Node &n = nodes_[id];
		if (!n.has_grad) {
			const Matrix &v = value(id);
			n.grad = Matrix::Zero(v.rows(), v.cols());
			n.has_grad = true;
		}
		return n.grad;
	}

	const Matrix &upstream(std::size_t id) const {
		return nodes_[id].grad;
	}

	std::size_t parent(std::size_t id, std::size_t k) const {
		return nodes_[id].parents[k];
	}

	std::size_t parent_count(std::size_t id) const {
		return nodes_[id].parents.size();
	}

	/// Reverse sweep from a scalar node. Leaf gradients are kept; gradients of
	/// intermediate nodes are released once propagated.
	void backward(Var loss) {
		const Matrix &lv = value(loss.id);
		if (lv.rows() != 1 || lv.cols() != 1) {
			throw ShapeError("backward: loss must be 1x1, got " + detail::shape_string(lv.rows(), lv.cols()));
		}
		for (auto &n : nodes_) {
			n.has_grad = false;
			n.grad.resize(0, 0);
		}
		accumulate(loss.id)(0, 0) = Scalar(1);
		for (std::size_t i = loss.id + 1; i-- > 0;) {
			Node &n = nodes_[i];
			if (!n.requires_grad || !n.has_grad) {
				continue;
			}
			if (n.rule) {
				n.rule(*this, i);
			}
			if (!n.is_leaf) {
				n.grad.resize(0, 0);
				n.has_grad = false;
			}
		}
	}

	/// Gradient of a leaf after backward(); zeros if the leaf did not influence the loss.
	Matrix gradient(Var v) const {
		const Node &n = nodes_[v.id];
		if (n.has_grad) {
			return n.grad;
		}
		const Matrix &val = value(v.id);
		return Matrix::Zero(val.rows(), val.cols());
	}

	void clear() {
		nodes_.clear();
	}

	std::size_t size() const {
		return nodes_.size();
	}

private:
	struct Node {
		Matrix owned;
		const Matrix *bound = nullptr;
		Matrix grad;
		bool has_grad = false;
		bool requires_grad = false;
		bool is_leaf = false;
		std::vector<std::size_t> parents;
		BackwardRule rule;
		const char *op = "";
	};

	static void check_finite(const Matrix &m, const char *op) {
		if (!m.allFinite()) {
			throw NumericError(std::string("non-finite value produced by ") + op);
		}
	}

	Var push(Node node) {
		nodes_.push_back(std::move(node));
		return Var{this, nodes_.size() - 1};
	}

	std::vector<Node> nodes_;
};

using Tape = BasicTape<double>;
using Var = BasicVar<double>;

namespace detail {

template <typename Scalar>
void require_same_shape(const BasicVar<Scalar> &a, const BasicVar<Scalar> &b, const char *op) {
	if (a.rows() != b.rows() || a.cols() != b.cols()) {
		throw ShapeError(std::string(op) + ": shape mismatch " + shape_string(a.rows(), a.cols()) + " vs " +
		                 shape_string(b.rows(), b.cols()));
	}
}

template <typename Scalar>
void add_to_parent(BasicTape<Scalar> &t, std::size_t self, std::size_t k,
                   const typename BasicTape<Scalar>::Matrix &g) {
	const std::size_t p = t.parent(self, k);
	if (t.requires_grad(p)) {
		t.accumulate(p) += g;
	}
}

} // namespace detail

template <typename Scalar>
BasicVar<Scalar> matmul(const BasicVar<Scalar> &a, const BasicVar<Scalar> &b) {
	if (a.cols() != b.rows()) {
		throw ShapeError("matmul: shape mismatch " + detail::shape_string(a.rows(), a.cols()) + " vs " +
		                 detail::shape_string(b.rows(), b.cols()));
	}
	auto &t = *a.tape;
	return t.record(a.value() * b.value(), {a, b},
	                [](BasicTape<Scalar> &tp, std::size_t self) {
		                const auto &g = tp.upstream(self);
		                const std::size_t pa = tp.parent(self, 0);
		                const std::size_t pb = tp.parent(self, 1);
		                if (tp.requires_grad(pa)) {
			                tp.accumulate(pa).noalias() += g * tp.value(pb).transpose();
		                }
		                if (tp.requires_grad(pb)) {
			                tp.accumulate(pb).noalias() += tp.value(pa).transpose() * g;
		                }
	                },
	                "matmul");
}

template <typename Scalar>
BasicVar<Scalar> add(const BasicVar<Scalar> &a, const BasicVar<Scalar> &b) {
	detail::require_same_shape(a, b, "add");
	return a.tape->record(a.value() + b.value(), {a, b},
	                      [](BasicTape<Scalar> &tp, std::size_t self) {
		                      const auto &g = tp.upstream(self);
		                      detail::add_to_parent(tp, self, 0, g);
		                      detail::add_to_parent(tp, self, 1, g);
	                      },
	                      "add");
}

template <typename Scalar>
BasicVar<Scalar> subtract(const BasicVar<Scalar> &a, const BasicVar<Scalar> &b) {
	detail::require_same_shape(a, b, "subtract");
	return a.tape->record(a.value() - b.value(), {a, b},
	                      [](BasicTape<Scalar> &tp, std::size_t self) {
		                      const auto &g = tp.upstream(self);
		                      detail::add_to_parent(tp, self, 0, g);
		                      const std::size_t pb = tp.parent(self, 1);
		                      if (tp.requires_grad(pb)) {
			                      tp.accumulate(pb) -= g;
		                      }
	                      },
	                      "subtract");
}

/// Elementwise product.
template <typename Scalar>
BasicVar<Scalar> hadamard(const BasicVar<Scalar> &a, const BasicVar<Scalar> &b) {
	detail::require_same_shape(a, b, "hadamard");
	return a.tape->record(a.value().cwiseProduct(b.value()), {a, b},
	                      [](BasicTape<Scalar> &tp, std::size_t self) {
		                      const auto &g = tp.upstream(self);
		                      const std::size_t pa = tp.parent(self, 0);
		                      const std::size_t pb = tp.parent(self, 1);
		                      if (tp.requires_grad(pa)) {
			                      tp.accumulate(pa) += g.cwiseProduct(tp.value(pb));
		                      }
		                      if (tp.requires_grad(pb)) {
			                      tp.accumulate(pb) += g.cwiseProduct(tp.value(pa));
		                      }
	                      },
	                      "hadamard");
}

template <typename Scalar>
BasicVar<Scalar> concat_rows(std::span<const BasicVar<Scalar>> parts) {
	if (parts.empty()) {
		throw ShapeError("concat_rows: no operands");
	}
	const Eigen::Index cols = parts.front().cols();
	Eigen::Index rows = 0;
	for (const auto &p : parts) {
		if (p.cols() != cols) {
			throw ShapeError("concat_rows: column mismatch " + detail::shape_string(parts.front().rows(), cols) +
			                 " vs " + detail::shape_string(p.rows(), p.cols()));
		}
		rows += p.rows();
	}
	typename BasicTape<Scalar>::Matrix out(rows, cols);
	Eigen::Index at = 0;
	for (const auto &p : parts) {
		out.middleRows(at, p.rows()) = p.value();
		at += p.rows();
	}
	std::vector<BasicVar<Scalar>> parents(parts.begin(), parts.end());
	return parts.front().tape->record(std::move(out), parents,
	                                  [](BasicTape<Scalar> &tp, std::size_t self) {
		                                  const auto &g = tp.upstream(self);
		                                  Eigen::Index offset = 0;
		                                  for (std::size_t k = 0; k < tp.parent_count(self); ++k) {
			                                  const std::size_t p = tp.parent(self, k);
			                                  const Eigen::Index r = tp.value(p).rows();
			                                  if (tp.requires_grad(p)) {
				                                  tp.accumulate(p) += g.middleRows(offset, r);
			                                  }
			                                  offset += r;
		                                  }
	                                  },
	                                  "concat_rows");
}

template <typename Scalar>
BasicVar<Scalar> concat_rows(std::initializer_list<BasicVar<Scalar>> parts) {
	return concat_rows(std::span<const BasicVar<Scalar>>(parts.begin(), parts.size()));
}

template <typename Scalar>
BasicVar<Scalar> slice_rows(const BasicVar<Scalar> &a, Eigen::Index start, Eigen::Index count) {
	if (start < 0 || count < 0 || start + count > a.rows()) {
		throw ShapeError("slice_rows: rows [" + std::to_string(start) + ", " + std::to_string(start + count) +
		                 ") out of range for " + detail::shape_string(a.rows(), a.cols()));
	}
	return a.tape->record(a.value().middleRows(start, count), {a},
	                      [start, count](BasicTape<Scalar> &tp, std::size_t self) {
		                      tp.accumulate(tp.parent(self, 0)).middleRows(start, count) += tp.upstream(self);
	                      },
	                      "slice_rows");
}

template <typename Scalar>
BasicVar<Scalar> sigmoid(const BasicVar<Scalar> &a) {
	typename BasicTape<Scalar>::Matrix y =
	    a.value().unaryExpr([](Scalar v) { return Scalar(1) / (Scalar(1) + std::exp(-v)); });
	return a.tape->record(std::move(y), {a},
	                      [](BasicTape<Scalar> &tp, std::size_t self) {
		                      const auto &y = tp.value(self);
		                      tp.accumulate(tp.parent(self, 0)) +=
		                          tp.upstream(self).cwiseProduct(y.cwiseProduct((Scalar(1) - y.array()).matrix()));
	                      },
	                      "sigmoid");
}

template <typename Scalar>
BasicVar<Scalar> tanh(const BasicVar<Scalar> &a) {
	typename BasicTape<Scalar>::Matrix y = a.value().array().tanh().matrix();
	return a.tape->record(std::move(y), {a},
	                      [](BasicTape<Scalar> &tp, std::size_t self) {
		                      const auto &y = tp.value(self);
		                      tp.accumulate(tp.parent(self, 0)) +=
		                          tp.upstream(self).cwiseProduct((Scalar(1) - y.array().square()).matrix());
	                      },
	                      "tanh");
}

template <typename Scalar>
BasicVar<Scalar> exp(const BasicVar<Scalar> &a) {
	typename BasicTape<Scalar>::Matrix y = a.value().array().exp().matrix();
	return a.tape->record(std::move(y), {a},
	                      [](BasicTape<Scalar> &tp, std::size_t self) {
		                      tp.accumulate(tp.parent(self, 0)) += tp.upstream(self).cwiseProduct(tp.value(self));
	                      },
	                      "exp");
}

template <typename Scalar>
BasicVar<Scalar> log(const BasicVar<Scalar> &a) {
	if ((a.value().array() <= Scalar(0)).any()) {
		throw DomainError("log: non-positive input");
	}
	typename BasicTape<Scalar>::Matrix y = a.value().array().log().matrix();
	return a.tape->record(std::move(y), {a},
	                      [](BasicTape<Scalar> &tp, std::size_t self) {
		                      const std::size_t p = tp.parent(self, 0);
		                      tp.accumulate(p) += tp.upstream(self).cwiseQuotient(tp.value(p));
	                      },
	                      "log");
}

template <typename Scalar>
BasicVar<Scalar> scalar_mul(const BasicVar<Scalar> &a, Scalar s) {
	return a.tape->record(a.value() * s, {a},
	                      [s](BasicTape<Scalar> &tp, std::size_t self) {
		                      tp.accumulate(tp.parent(self, 0)) += tp.upstream(self) * s;
	                      },
	                      "scalar_mul");
}

template <typename Scalar>
BasicVar<Scalar> sum(const BasicVar<Scalar> &a) {
	typename BasicTape<Scalar>::Matrix y = BasicTape<Scalar>::Matrix::Constant(1, 1, a.value().sum());
	return a.tape->record(std::move(y), {a},
	                      [](BasicTape<Scalar> &tp, std::size_t self) {
		                      tp.accumulate(tp.parent(self, 0)).array() += tp.upstream(self)(0, 0);
	                      },
	                      "sum");
}

template <typename Scalar>
BasicVar<Scalar> mean(const BasicVar<Scalar> &a) {
	const auto n = static_cast<Scalar>(a.value().size());
	typename BasicTape<Scalar>::Matrix y = BasicTape<Scalar>::Matrix::Constant(1, 1, a.value().mean());
	return a.tape->record(std::move(y), {a},
	                      [n](BasicTape<Scalar> &tp, std::size_t self) {
		                      tp.accumulate(tp.parent(self, 0)).array() += tp.upstream(self)(0, 0) / n;
	                      },
	                      "mean");
}

/// 1 - a, elementwise.
template <typename Scalar>
BasicVar<Scalar> one_minus(const BasicVar<Scalar> &a) {
	auto &t = *a.tape;
	return subtract(t.constant(BasicTape<Scalar>::Matrix::Ones(a.rows(), a.cols())), a);
}

template <typename Scalar>
BasicVar<Scalar> operator+(const BasicVar<Scalar> &a, const BasicVar<Scalar> &b) {
	return add(a, b);
}

template <typename Scalar>
BasicVar<Scalar> operator-(const BasicVar<Scalar> &a, const BasicVar<Scalar> &b) {
	return subtract(a, b);
}

// ---------------------------------------------------------------------------
// Gradient checking against central finite differences.

struct GradCheckOptions {
	double step = 1e-5;
	/// Magnitudes below this floor are compared on an absolute scale.
	double scale_floor = 1e-4;
	/// When > 0, only this many randomly chosen coordinates per parameter are probed.
	std::size_t max_coords_per_param = 0;
	std::uint64_t seed = 7;
};

struct GradCheckEntry {
	std::string name;
	double max_rel_error = 0.0;
	Eigen::Index worst_index = 0;
	std::size_t probed = 0;
};

struct GradCheckReport {
	std::vector<GradCheckEntry> entries;
	double tolerance = 0.0;
	bool passed = true;

	double max_error() const {
		double m = 0.0;
		for (const auto &e : entries) {
			m = std::max(m, e.max_rel_error);
		}
		return m;
	}
};

inline double relative_error(double analytic, double numeric, double floor) {
	return std::abs(analytic - numeric) / std::max({std::abs(analytic), std::abs(numeric), floor});
}

/// Compares tape gradients of `fn` with central differences for every parameter.
/// `fn(tape, leaves)` must build a scalar loss from the leaves bound to `params`.
template <typename Fn>
GradCheckReport grad_check(Fn &&fn, std::span<Eigen::MatrixXd *const> params, std::span<const std::string> names,
                           double tolerance, const GradCheckOptions &opts = {}) {
	auto evaluate = [&](bool with_grad, std::vector<Eigen::MatrixXd> *grads) {
		Tape tape;
		std::vector<Var> leaves;
		leaves.reserve(params.size());
		for (auto *p : params) {
			leaves.push_back(tape.leaf(*p));
		}
		Var loss = fn(tape, std::span<const Var>(leaves));
		const double v = loss.scalar();
		if (with_grad) {
			tape.backward(loss);
			for (const auto &l : leaves) {
				grads->push_back(tape.gradient(l));
			}
		}
		return v;
	};

	std::vector<Eigen::MatrixXd> analytic;
	evaluate(true, &analytic);

	GradCheckReport report;
	report.tolerance = tolerance;
	std::mt19937_64 rng(opts.seed);
	for (std::size_t k = 0; k < params.size(); ++k) {
		Eigen::MatrixXd &p = *params[k];
		GradCheckEntry entry;
		entry.name = k < names.size() ? names[k] : "param" + std::to_string(k);
		std::vector<Eigen::Index> coords(static_cast<std::size_t>(p.size()));
		for (Eigen::Index i = 0; i < p.size(); ++i) {
			coords[static_cast<std::size_t>(i)] = i;
		}
		if (opts.max_coords_per_param > 0 && coords.size() > opts.max_coords_per_param) {
			std::shuffle(coords.begin(), coords.end(), rng);
			coords.resize(opts.max_coords_per_param);
		}
		for (Eigen::Index i : coords) {
			const double saved = p.data()[i];
			p.data()[i] = saved + opts.step;
			const double up = evaluate(false, nullptr);
			p.data()[i] = saved - opts.step;
			const double down = evaluate(false, nullptr);
			p.data()[i] = saved;
			const double numeric = (up - down) / (2.0 * opts.step);
			const double err = relative_error(analytic[k].data()[i], numeric, opts.scale_floor);
			if (err > entry.max_rel_error) {
				entry.max_rel_error = err;
				entry.worst_index = i;
			}
			++entry.probed;
		}
		if (entry.max_rel_error > tolerance) {
			report.passed = false;
		}
		report.entries.push_back(std::move(entry));
	}
	return report;
}

} // namespace esdrnn::ad
