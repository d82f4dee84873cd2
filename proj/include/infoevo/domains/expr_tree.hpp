#pragma once

#include <algorithm>
#include <array>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <map>
#include <optional>
#include <span>
#include <sstream>
#include <string>
#include <vector>

#include "infoevo/behavior.hpp"
#include "infoevo/core.hpp"
#include "infoevo/error.hpp"
#include "infoevo/random.hpp"

namespace infoevo::domains {

enum class Op : std::uint8_t { add, sub, mul, div };

inline constexpr std::array<double, 5> kConstantPool{0.0, 1.0, 2.0, 0.5, -1.0};
inline constexpr double kProtectedDivisionEpsilon = 1e-9;
/// Score assigned when a tree produces a non-finite output.
inline constexpr double kNonFiniteScore = -1e30;

struct Node {
  enum class Kind : std::uint8_t { op, var, constant };
  Kind kind = Kind::constant;
  std::uint8_t index = 0;  // Op, variable index or constant-pool index

  static Node make_op(Op o) { return {Kind::op, static_cast<std::uint8_t>(o)}; }
  static Node var(std::size_t i) { return {Kind::var, static_cast<std::uint8_t>(i)}; }
  static Node constant(std::size_t i) { return {Kind::constant, static_cast<std::uint8_t>(i)}; }

  bool is_op() const noexcept { return kind == Kind::op; }
  Op op() const noexcept { return static_cast<Op>(index); }
  friend bool operator==(const Node&, const Node&) = default;
};

/// Binary expression tree stored in preorder. Every operator has two children.
struct ExprTree {
  std::vector<Node> nodes;
  friend bool operator==(const ExprTree&, const ExprTree&) = default;
};

// -- structural helpers -------------------------------------------------------

/// One past the last preorder index of the subtree rooted at `i`.
inline std::size_t subtree_end(const ExprTree& t, std::size_t i) {
  std::size_t open = 1;
  while (open > 0) {
    open += t.nodes[i].is_op() ? 2 : 0;
    --open;
    ++i;
  }
  return i;
}

/// Depth of every node (root has depth 0).
inline std::vector<int> node_depths(const ExprTree& t) {
  std::vector<int> depth(t.nodes.size(), 0);
  std::vector<int> stack;  // depths of pending child slots
  stack.push_back(0);
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    const int d = stack.back();
    stack.pop_back();
    depth[i] = d;
    if (t.nodes[i].is_op()) {
      stack.push_back(d + 1);
      stack.push_back(d + 1);
    }
  }
  return depth;
}

inline int tree_depth(const ExprTree& t) {
  const auto d = node_depths(t);
  return d.empty() ? 0 : *std::max_element(d.begin(), d.end());
}

inline bool well_formed(const ExprTree& t) {
  if (t.nodes.empty()) return false;
  std::size_t open = 1;
  for (std::size_t i = 0; i < t.nodes.size(); ++i) {
    if (open == 0) return false;
    open += t.nodes[i].is_op() ? 2 : 0;
    --open;
  }
  return open == 0;
}

inline double protected_div(double a, double b) {
  return std::abs(b) < kProtectedDivisionEpsilon ? 1.0 : a / b;
}

namespace detail {
inline double eval_at(const ExprTree& t, std::size_t& i, std::span<const double> x) {
  const Node n = t.nodes[i++];
  switch (n.kind) {
    case Node::Kind::var:
      return x[n.index];
    case Node::Kind::constant:
      return kConstantPool[n.index];
    case Node::Kind::op:
      break;
  }
  const double a = eval_at(t, i, x);
  const double b = eval_at(t, i, x);
  switch (n.op()) {
    case Op::add:
      return a + b;
    case Op::sub:
      return a - b;
    case Op::mul:
      return a * b;
    case Op::div:
      return protected_div(a, b);
  }
  return 0.0;
}

inline std::string constant_text(double c) {
  char buf[32];
  std::snprintf(buf, sizeof buf, "%.17g", c);
  return buf;
}

inline void print_prefix(const ExprTree& t, std::size_t& i, std::string& out) {
  const Node n = t.nodes[i++];
  if (n.kind == Node::Kind::var) {
    out += "x" + std::to_string(n.index);
    return;
  }
  if (n.kind == Node::Kind::constant) {
    out += constant_text(kConstantPool[n.index]);
    return;
  }
  static constexpr std::array<char, 4> symbol{'+', '-', '*', '/'};
  out += '(';
  out += symbol[n.index];
  out += ' ';
  print_prefix(t, i, out);
  out += ' ';
  print_prefix(t, i, out);
  out += ')';
}

inline void print_infix(const ExprTree& t, std::size_t& i, std::string& out) {
  const Node n = t.nodes[i++];
  if (!n.is_op()) {
    --i;
    print_prefix(t, i, out);
    return;
  }
  static constexpr std::array<const char*, 4> symbol{" + ", " - ", " * ", " / "};
  out += '(';
  print_infix(t, i, out);
  out += symbol[n.index];
  print_infix(t, i, out);
  out += ')';
}
}  // namespace detail

inline double evaluate_tree(const ExprTree& t, std::span<const double> x) {
  std::size_t i = 0;
  return detail::eval_at(t, i, x);
}

/// Canonical preorder print, used as the deduplication key.
inline std::string prefix_string(const ExprTree& t) {
  std::string s;
  std::size_t i = 0;
  if (!t.nodes.empty()) detail::print_prefix(t, i, s);
  return s;
}

inline std::string infix_string(const ExprTree& t) {
  std::string s;
  std::size_t i = 0;
  if (!t.nodes.empty()) detail::print_infix(t, i, s);
  return s;
}

// -- datasets -------------------------------------------------------------------

struct Dataset {
  std::vector<std::vector<double>> inputs;  // one row per case
  std::vector<double> outputs;

  std::size_t arity() const { return inputs.empty() ? 0 : inputs.front().size(); }
  std::size_t size() const { return outputs.size(); }
};

/// f(x) = x^2 + x sampled at x in {-1, 0, 1, 2}.
inline Dataset default_dataset() {
  Dataset d;
  for (double x : {-1.0, 0.0, 1.0, 2.0}) {
    d.inputs.push_back({x});
    d.outputs.push_back(x * x + x);
  }
  return d;
}

/// Reads a CSV with a mandatory header row; the last column is the output.
inline Dataset load_csv_dataset(std::istream& in) {
  std::string line;
  if (!std::getline(in, line)) throw ConfigError("dataset", "missing header row");
  auto split = [](const std::string& s) {
    std::vector<std::string> cells;
    std::string cell;
    std::istringstream ss(s);
    while (std::getline(ss, cell, ',')) cells.push_back(cell);
    return cells;
  };
  const std::size_t columns = split(line).size();
  if (columns < 2) throw ConfigError("dataset", "need at least one input and one output column");
  Dataset d;
  std::size_t row = 1;
  while (std::getline(in, line)) {
    ++row;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (line.empty()) continue;
    const auto cells = split(line);
    if (cells.size() != columns)
      throw ConfigError("dataset", "row " + std::to_string(row) + " has " +
                                       std::to_string(cells.size()) + " columns, expected " +
                                       std::to_string(columns));
    std::vector<double> values;
    for (const auto& c : cells) {
      try {
        std::size_t used = 0;
        values.push_back(std::stod(c, &used));
      } catch (const std::exception&) {
        throw ConfigError("dataset", "row " + std::to_string(row) + ": not a number: " + c);
      }
    }
    d.outputs.push_back(values.back());
    values.pop_back();
    d.inputs.push_back(std::move(values));
  }
  if (d.outputs.empty()) throw ConfigError("dataset", "no data rows");
  return d;
}

inline Dataset load_csv_dataset(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ConfigError("dataset", "cannot open " + path);
  return load_csv_dataset(in);
}

/// Negated mean squared error of `t` over the dataset.
inline double score_symreg(const ExprTree& t, const Dataset& data) {
  if (data.size() == 0) throw ConfigError("dataset", "empty dataset");
  double sse = 0.0;
  for (std::size_t i = 0; i < data.size(); ++i) {
    const double e = evaluate_tree(t, data.inputs[i]) - data.outputs[i];
    sse += e * e;
  }
  const double mse = sse / static_cast<double>(data.size());
  return std::isfinite(mse) ? -mse : kNonFiniteScore;
}

/// Label multiset term plus depth-profile term, each in [0, 1], averaged.
inline double tree_structural_distance(const ExprTree& a, const ExprTree& b) {
  if (a.nodes.empty() || b.nodes.empty()) throw DomainMismatch("empty tree");
  auto label = [](const Node& n) { return static_cast<int>(n.kind) * 256 + n.index; };
  std::map<int, std::size_t> ca, cb;
  for (const auto& n : a.nodes) ++ca[label(n)];
  for (const auto& n : b.nodes) ++cb[label(n)];
  std::size_t shared = 0;
  for (const auto& [l, c] : ca)
    if (auto it = cb.find(l); it != cb.end()) shared += std::min(c, it->second);
  const double size = static_cast<double>(std::max(a.nodes.size(), b.nodes.size()));
  const double label_term = 1.0 - static_cast<double>(shared) / size;

  const auto da = node_depths(a);
  const auto db = node_depths(b);
  const int levels = 1 + std::max(*std::max_element(da.begin(), da.end()),
                                  *std::max_element(db.begin(), db.end()));
  std::vector<double> ha(static_cast<std::size_t>(levels), 0.0), hb = ha;
  for (int d : da) ha[static_cast<std::size_t>(d)] += 1.0 / static_cast<double>(da.size());
  for (int d : db) hb[static_cast<std::size_t>(d)] += 1.0 / static_cast<double>(db.size());
  double l1 = 0.0;
  for (std::size_t i = 0; i < ha.size(); ++i) l1 += std::abs(ha[i] - hb[i]);
  const double depth_term = std::min(1.0, 0.5 * l1);
  return 0.5 * (label_term + depth_term);
}

enum class BehaviorMetric { euclidean, fisher };

/// Symbolic regression over expression trees with operators {+, -, *, protected /},
/// variables restricted to `variables`, and the fixed constant pool.
class SymbolicRegressionProblem {
 public:
  using genotype_type = ExprTree;

  explicit SymbolicRegressionProblem(Dataset data = default_dataset(), int max_depth = 5,
                                     std::optional<double> target = -1e-12,
                                     BehaviorMetric behavior_metric = BehaviorMetric::euclidean)
      : data_(std::move(data)),
        max_depth_(max_depth),
        target_(target),
        behavior_metric_(behavior_metric) {
    if (data_.size() == 0 || data_.arity() == 0)
      throw ConfigError("dataset", "dataset needs inputs and rows");
    if (max_depth_ < 1 || max_depth_ > 8) throw ConfigError("max_depth", "must lie in [1, 8]");
    for (std::size_t i = 0; i < data_.arity(); ++i) variables_.push_back(i);
  }

  std::string name() const { return "symreg"; }
  const Dataset& dataset() const noexcept { return data_; }
  int max_depth() const noexcept { return max_depth_; }
  std::size_t arity() const noexcept { return data_.arity(); }
  const std::vector<std::size_t>& variables() const noexcept { return variables_; }

  SymbolicRegressionProblem restricted(const std::vector<std::size_t>& subset) const {
    if (subset.empty()) throw ConfigError("feature_subset", "must be nonempty");
    SymbolicRegressionProblem p = *this;
    p.variables_.clear();
    for (std::size_t v : subset) {
      if (v >= arity()) throw ConfigError("feature_subset", "variable index out of range");
      p.variables_.push_back(v);
    }
    std::sort(p.variables_.begin(), p.variables_.end());
    p.variables_.erase(std::unique(p.variables_.begin(), p.variables_.end()), p.variables_.end());
    return p;
  }

  /// True when every variable leaf is allowed and the depth bound holds.
  bool valid(const ExprTree& t) const {
    if (!well_formed(t) || tree_depth(t) > max_depth_) return false;
    for (const auto& n : t.nodes) {
      if (n.kind == Node::Kind::var &&
          std::find(variables_.begin(), variables_.end(), n.index) == variables_.end())
        return false;
      if (n.kind == Node::Kind::constant && n.index >= kConstantPool.size()) return false;
      if (n.kind == Node::Kind::op && n.index > 3) return false;
    }
    return true;
  }

  double score(const ExprTree& t) const { return score_symreg(t, data_); }
  std::optional<double> target() const { return target_; }
  std::string key(const ExprTree& t) const { return prefix_string(t); }
  std::string render(const ExprTree& t) const { return infix_string(t); }

  ExprTree random_genotype(Rng& rng) const {
    ExprTree t;
    const int depth = 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(max_depth_)));
    grow(t.nodes, depth, bernoulli(rng, 0.5), rng);
    return t;
  }

  /// Each node is a mutation point with probability `rate`: operators either
  /// change symbol or are replaced by a fresh subtree, leaves either change
  /// symbol or grow a subtree. Depth bound is preserved.
  ExprTree mutate(const ExprTree& t, double rate, Rng& rng) const {
    ExprTree out = t;
    if (rate <= 0.0) return out;
    std::vector<std::size_t> points;
    for (std::size_t i = 0; i < t.nodes.size(); ++i)
      if (bernoulli(rng, rate)) points.push_back(i);
    for (auto it = points.rbegin(); it != points.rend(); ++it) {
      const std::size_t i = *it;
      if (i >= out.nodes.size()) continue;
      const int depth = node_depths(out)[i];
      const int room = max_depth_ - depth;
      const bool point_change = bernoulli(rng, 0.5) || room == 0;
      if (point_change) {
        if (out.nodes[i].is_op()) {
          auto o = static_cast<std::uint8_t>((out.nodes[i].index + 1 + uniform_index(rng, 3)) % 4);
          out.nodes[i].index = o;
        } else {
          out.nodes[i] = random_leaf(rng);
        }
      } else {
        std::vector<Node> sub;
        grow(sub, 1 + static_cast<int>(uniform_index(rng, static_cast<std::size_t>(room))), false,
             rng);
        const std::size_t end = subtree_end(out, i);
        out.nodes.erase(out.nodes.begin() + static_cast<std::ptrdiff_t>(i),
                        out.nodes.begin() + static_cast<std::ptrdiff_t>(end));
        out.nodes.insert(out.nodes.begin() + static_cast<std::ptrdiff_t>(i), sub.begin(), sub.end());
      }
    }
    return out;
  }

  /// Subtree crossover: a random subtree of `b` replaces a random subtree of
  /// `a` when the result respects the depth bound; otherwise `a` is returned.
  ExprTree crossover(const ExprTree& a, const ExprTree& b, Rng& rng) const {
    const auto da = node_depths(a);
    for (int attempt = 0; attempt < 8; ++attempt) {
      const std::size_t i = uniform_index(rng, a.nodes.size());
      const std::size_t j = uniform_index(rng, b.nodes.size());
      const std::size_t jend = subtree_end(b, j);
      ExprTree donor{{b.nodes.begin() + static_cast<std::ptrdiff_t>(j),
                      b.nodes.begin() + static_cast<std::ptrdiff_t>(jend)}};
      if (da[i] + tree_depth(donor) > max_depth_) continue;
      ExprTree out = a;
      const std::size_t iend = subtree_end(a, i);
      out.nodes.erase(out.nodes.begin() + static_cast<std::ptrdiff_t>(i),
                      out.nodes.begin() + static_cast<std::ptrdiff_t>(iend));
      out.nodes.insert(out.nodes.begin() + static_cast<std::ptrdiff_t>(i), donor.nodes.begin(),
                       donor.nodes.end());
      return out;
    }
    return a;
  }

  // Loci are heap positions of the full binary tree of depth max_depth; value
  // 0 marks an absent node, otherwise 1 + label code.
  std::size_t locus_count() const { return (std::size_t{1} << (max_depth_ + 1)) - 1; }
  int label_count() const { return 4 + static_cast<int>(arity()) + static_cast<int>(kConstantPool.size()); }

  int label_code(const Node& n) const {
    switch (n.kind) {
      case Node::Kind::op:
        return n.index;
      case Node::Kind::var:
        return 4 + n.index;
      case Node::Kind::constant:
        return 4 + static_cast<int>(arity()) + n.index;
    }
    return 0;
  }

  Node node_of(int code) const {
    if (code < 4) return Node::make_op(static_cast<Op>(code));
    if (code < 4 + static_cast<int>(arity())) return Node::var(static_cast<std::size_t>(code - 4));
    return Node::constant(static_cast<std::size_t>(code - 4 - static_cast<int>(arity())));
  }

  std::vector<int> loci(const ExprTree& t) const {
    std::vector<int> out(locus_count(), 0);
    std::size_t i = 0;
    fill_loci(t, i, 0, out);
    return out;
  }

  std::vector<int> locus_alphabet() const {
    return std::vector<int>(locus_count(), 1 + label_count());
  }

  /// Top-down sampling: each present position draws a label from its marginal
  /// renormalized over labels that keep the tree valid at that depth.
  ExprTree sample_loci(const Marginals& marginals, Rng& rng) const {
    ExprTree t;
    sample_at(marginals, 0, 0, t.nodes, rng);
    return t;
  }

  double genotypic_distance(const ExprTree& a, const ExprTree& b) const {
    return tree_structural_distance(a, b);
  }

  /// Outputs on the dataset inputs, with non-finite values replaced by a
  /// large sentinel so that distances stay finite.
  std::vector<double> behavior(const ExprTree& t) const {
    std::vector<double> out(data_.size());
    for (std::size_t i = 0; i < data_.size(); ++i) {
      const double y = evaluate_tree(t, data_.inputs[i]);
      out[i] = std::isfinite(y) ? std::clamp(y, -1e15, 1e15) : 1e15;
    }
    return out;
  }

  double behavioral_distance(std::span<const double> a, std::span<const double> b) const {
    if (behavior_metric_ == BehaviorMetric::fisher) return behavior_fisher_distance(a, b);
    double s = 0.0;
    for (std::size_t i = 0; i < a.size(); ++i) s += (a[i] - b[i]) * (a[i] - b[i]);
    return std::sqrt(s);
  }

 private:
  Node random_leaf(Rng& rng) const {
    if (!variables_.empty() && bernoulli(rng, 0.5))
      return Node::var(variables_[uniform_index(rng, variables_.size())]);
    return Node::constant(uniform_index(rng, kConstantPool.size()));
  }

  void grow(std::vector<Node>& out, int depth_left, bool full, Rng& rng) const {
    const bool leaf = depth_left == 0 || (!full && bernoulli(rng, 0.3));
    if (leaf) {
      out.push_back(random_leaf(rng));
      return;
    }
    out.push_back(Node::make_op(static_cast<Op>(uniform_index(rng, 4))));
    grow(out, depth_left - 1, full, rng);
    grow(out, depth_left - 1, full, rng);
  }

  void fill_loci(const ExprTree& t, std::size_t& i, std::size_t pos, std::vector<int>& out) const {
    const Node n = t.nodes[i++];
    out[pos] = 1 + label_code(n);
    if (n.is_op()) {
      fill_loci(t, i, 2 * pos + 1, out);
      fill_loci(t, i, 2 * pos + 2, out);
    }
  }

  void sample_at(const Marginals& marginals, std::size_t pos, int depth, std::vector<Node>& out,
                 Rng& rng) const {
    std::vector<double> w(static_cast<std::size_t>(label_count()), 0.0);
    double total = 0.0;
    for (int code = 0; code < label_count(); ++code) {
      const Node n = node_of(code);
      if (n.is_op() && depth >= max_depth_) continue;
      if (n.kind == Node::Kind::var &&
          std::find(variables_.begin(), variables_.end(), n.index) == variables_.end())
        continue;
      const auto c = static_cast<std::size_t>(code);
      w[c] = marginals[pos][c + 1];
      total += w[c];
    }
    if (!(total > 0.0)) {
      for (int code = 0; code < label_count(); ++code) {
        const Node n = node_of(code);
        const bool ok = !(n.is_op() && depth >= max_depth_) &&
                        !(n.kind == Node::Kind::var &&
                          std::find(variables_.begin(), variables_.end(), n.index) ==
                              variables_.end());
        w[static_cast<std::size_t>(code)] = ok ? 1.0 : 0.0;
      }
    }
    const Node n = node_of(static_cast<int>(sample_categorical(rng, w)));
    out.push_back(n);
    if (n.is_op()) {
      sample_at(marginals, 2 * pos + 1, depth + 1, out, rng);
      sample_at(marginals, 2 * pos + 2, depth + 1, out, rng);
    }
  }

  Dataset data_;
  int max_depth_;
  std::optional<double> target_;
  BehaviorMetric behavior_metric_;
  std::vector<std::size_t> variables_;
};

}  // namespace infoevo::domains
