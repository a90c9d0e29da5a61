// Copyright 2026 The FARO Authors.
//
// Licensed under the Apache License, Version 2.0 (the "License");
// you may not use this file except in compliance with the License.
// You may obtain a copy of the License at
//
//     http://www.apache.org/licenses/LICENSE-2.0
//
// Unless required by applicable law or agreed to in writing, software
// distributed under the License is distributed on an "AS IS" BASIS,
// WITHOUT WARRANTIES OR CONDITIONS OF ANY KIND, either express or implied.
// See the License for the specific language governing permissions and
// limitations under the License.

// Preference data with demographic structure: intersectional group indexing,
// the planted-bias synthetic generator and the CSV interchange format.

#pragma once

#include <algorithm>
#include <charconv>
#include <cstdint>
#include <fstream>
#include <sstream>
#include <string>
#include <string_view>
#include <vector>

#include "faro/common.hpp"

namespace faro {

/// Cardinalities of the sensitive attributes S_1..S_N and of the
/// unrestricted attribute U.
struct AttributeLayout {
  std::vector<std::size_t> sensitive_dims{2};
  std::size_t unrestricted_card = 1;

  std::size_t attribute_count() const { return sensitive_dims.size(); }

  /// Number of intersectional groups p = prod p_n.
  std::size_t group_count() const {
    std::size_t p = 1;
    for (std::size_t c : sensitive_dims) p *= c;
    return p;
  }

  void validate() const {
    require(!sensitive_dims.empty(), "layout.sensitive_dims must name at least one attribute");
    for (std::size_t n = 0; n < sensitive_dims.size(); ++n)
      require(sensitive_dims[n] >= 1,
              "layout.sensitive_dims[" + std::to_string(n) + "] must be >= 1");
    require(unrestricted_card >= 1, "layout.unrestricted_card must be >= 1");
  }

  bool operator==(const AttributeLayout&) const = default;
};

/// Mixed-radix encoding of a sensitive-attribute assignment. The first
/// attribute is the most significant digit; all-zeros is the anchor group 0.
inline std::size_t group_index(std::span<const std::size_t> s, const AttributeLayout& layout) {
  if (s.size() != layout.sensitive_dims.size())
    throw ValidationError("expected " + std::to_string(layout.sensitive_dims.size()) +
                          " sensitive attributes, got " + std::to_string(s.size()));
  std::size_t id = 0;
  for (std::size_t n = 0; n < s.size(); ++n) {
    if (s[n] >= layout.sensitive_dims[n])
      throw ValidationError("sensitive attribute " + std::to_string(n) + " value " +
                            std::to_string(s[n]) + " out of range [0, " +
                            std::to_string(layout.sensitive_dims[n]) + ")");
    id = id * layout.sensitive_dims[n] + s[n];
  }
  return id;
}

/// Inverse of group_index.
inline std::vector<std::size_t> group_attributes(std::size_t group, const AttributeLayout& layout) {
  if (group >= layout.group_count())
    throw ValidationError("group id " + std::to_string(group) + " out of range");
  std::vector<std::size_t> s(layout.sensitive_dims.size());
  for (std::size_t n = s.size(); n-- > 0;) {
    s[n] = group % layout.sensitive_dims[n];
    group /= layout.sensitive_dims[n];
  }
  return s;
}

/// One featurized preference pair: feat_w was preferred over feat_l for
/// prompt x by an annotator with demographics (s, u).
struct PreferenceExample {
  Vector x;
  Vector feat_w;
  Vector feat_l;
  std::vector<std::size_t> s;
  std::size_t u = 0;

  bool operator==(const PreferenceExample&) const = default;
};

class Dataset {
 public:
  Dataset() = default;

  Dataset(AttributeLayout layout, std::size_t d, std::vector<PreferenceExample> examples)
      : layout_(std::move(layout)), d_(d), examples_(std::move(examples)) {
    layout_.validate();
    require(d_ >= 1, "feature dimension d must be >= 1");
    groups_.reserve(examples_.size());
    counts_.assign(layout_.group_count(), 0);
    for (std::size_t r = 0; r < examples_.size(); ++r) {
      const auto& ex = examples_[r];
      const std::string where = "example " + std::to_string(r) + ": ";
      require(ex.x.size() == d_ && ex.feat_w.size() == d_ && ex.feat_l.size() == d_,
              where + "feature vectors must all have length d=" + std::to_string(d_));
      require(ex.u < layout_.unrestricted_card,
              where + "u=" + std::to_string(ex.u) + " out of range");
      std::size_t g = 0;
      try {
        g = group_index(ex.s, layout_);
      } catch (const ValidationError& e) {
        throw ValidationError(where + e.what());
      }
      groups_.push_back(g);
      ++counts_[g];
    }
  }

  const AttributeLayout& layout() const { return layout_; }
  std::size_t dim() const { return d_; }
  std::size_t size() const { return examples_.size(); }
  bool empty() const { return examples_.empty(); }
  const std::vector<PreferenceExample>& examples() const { return examples_; }
  const PreferenceExample& operator[](std::size_t r) const { return examples_[r]; }

  std::size_t group_count() const { return layout_.group_count(); }
  /// Intersectional group id of example r.
  std::size_t group_of(std::size_t r) const { return groups_[r]; }
  const std::vector<std::size_t>& group_sizes() const { return counts_; }

  /// Smallest nonempty group size, 0 for an empty dataset.
  std::size_t min_group_size() const {
    std::size_t best = 0;
    for (std::size_t c : counts_)
      if (c > 0 && (best == 0 || c < best)) best = c;
    return best;
  }

  Dataset subset(std::span<const std::size_t> rows) const {
    std::vector<PreferenceExample> out;
    out.reserve(rows.size());
    for (std::size_t r : rows) out.push_back(examples_.at(r));
    return Dataset(layout_, d_, std::move(out));
  }

  bool operator==(const Dataset& o) const {
    return layout_ == o.layout_ && d_ == o.d_ && examples_ == o.examples_;
  }

 private:
  AttributeLayout layout_;
  std::size_t d_ = 1;
  std::vector<PreferenceExample> examples_;
  std::vector<std::size_t> groups_;
  std::vector<std::size_t> counts_{0};
};

/// Deterministic train/eval split; each row lands in eval with probability
/// eval_fraction.
inline std::pair<Dataset, Dataset> split_dataset(const Dataset& ds, double eval_fraction,
                                                 std::uint64_t seed) {
  require(eval_fraction >= 0.0 && eval_fraction <= 1.0, "eval_fraction must lie in [0, 1]");
  RandomStream rng(seed, StreamId::kSplit);
  std::vector<std::size_t> train, eval;
  for (std::size_t r = 0; r < ds.size(); ++r) (rng.bernoulli(eval_fraction) ? eval : train).push_back(r);
  return {ds.subset(train), ds.subset(eval)};
}

// ---------------------------------------------------------------------------
// Synthetic generator
// ---------------------------------------------------------------------------

struct SyntheticConfig {
  std::size_t n_examples = 2000;
  std::size_t d = 5;
  AttributeLayout layout;
  double bias_strength = 1.0;
  double noise = 0.0;
  std::uint64_t seed = 7;

  void validate() const {
    require(n_examples >= 1, "n_examples must be >= 1");
    require(d >= 1, "d must be >= 1");
    layout.validate();
    require(bias_strength >= 0.0 && std::isfinite(bias_strength), "bias_strength must be >= 0");
    require(noise >= 0.0 && std::isfinite(noise), "noise must be >= 0");
  }
};

/// The generating process behind generate_synthetic.
///
/// Annotators in group g score a response y by w_g . y, where y has been
/// drawn N(0, I) and then shrunk on the dimensions group g does not "own".
/// With bias b (clamped to 1 for the geometric parts):
///   - non-lever dim j is owned by group j mod p; non-owned dims shrink by
///     (1 - 0.7 b) and get annotator weight (1 - b);
///   - the last dim is a shared lever whose annotator weight runs linearly
///     from +2b (anchor group) to -2b (last group);
///   - after labelling, group g's pair is flipped with probability
///     min(0.45, 0.3 b g / (p - 1)).
/// At b = 0 every group has weights (1, ..., 1, 0), identical feature laws
/// and no flips, so groups are exchangeable.
class PlantedModel {
 public:
  PlantedModel(const AttributeLayout& layout, std::size_t d, double bias_strength)
      : p_(layout.group_count()), d_(d), bias_(bias_strength) {
    const double b = std::min(bias_, 1.0);
    const bool has_lever = d_ >= 2;
    const std::size_t plain_dims = has_lever ? d_ - 1 : d_;
    weights_.assign(p_, Vector(d_, 0.0));
    scales_.assign(p_, Vector(d_, 1.0));
    flips_.assign(p_, 0.0);
    for (std::size_t g = 0; g < p_; ++g) {
      for (std::size_t j = 0; j < plain_dims; ++j) {
        const bool owned = p_ == 1 || j % p_ == g;
        weights_[g][j] = owned ? 1.0 : 1.0 - b;
        scales_[g][j] = owned ? 1.0 : 1.0 - 0.7 * b;
      }
      if (p_ > 1) {
        const double pos = static_cast<double>(g) / static_cast<double>(p_ - 1);
        if (has_lever) weights_[g][d_ - 1] = 2.0 * b * (1.0 - 2.0 * pos);
        flips_[g] = std::min(0.45, 0.3 * bias_ * pos);
      }
    }
  }

  /// Annotator weights of group g over response features.
  const Vector& annotator_weights(std::size_t g) const { return weights_[g]; }
  /// Per-dimension feature scale of responses shown to group g.
  const Vector& feature_scales(std::size_t g) const { return scales_[g]; }
  double flip_probability(std::size_t g) const { return flips_[g]; }

  /// Unbiased quality weights (1 on every non-lever dim, 0 on the lever).
  Vector quality_weights() const {
    Vector w(d_, 1.0);
    if (d_ >= 2) w[d_ - 1] = 0.0;
    return w;
  }

  /// Draws one response feature vector for group g.
  Vector draw_response(std::size_t g, RandomStream& rng) const {
    Vector y(d_);
    for (std::size_t j = 0; j < d_; ++j) y[j] = rng.normal() * scales_[g][j];
    return y;
  }

 private:
  std::size_t p_;
  std::size_t d_;
  double bias_;
  std::vector<Vector> weights_;
  std::vector<Vector> scales_;
  Vector flips_;
};

inline Dataset generate_synthetic(const SyntheticConfig& cfg) {
  cfg.validate();
  const PlantedModel model(cfg.layout, cfg.d, cfg.bias_strength);
  RandomStream rng(cfg.seed, StreamId::kDataset);
  std::vector<PreferenceExample> out;
  out.reserve(cfg.n_examples);
  for (std::size_t r = 0; r < cfg.n_examples; ++r) {
    PreferenceExample ex;
    ex.s.resize(cfg.layout.attribute_count());
    for (std::size_t n = 0; n < ex.s.size(); ++n) ex.s[n] = rng.below(cfg.layout.sensitive_dims[n]);
    ex.u = rng.below(cfg.layout.unrestricted_card);
    const std::size_t g = group_index(ex.s, cfg.layout);
    ex.x.resize(cfg.d);
    for (double& v : ex.x) v = rng.normal();
    Vector a = model.draw_response(g, rng);
    Vector b = model.draw_response(g, rng);
    const auto& w = model.annotator_weights(g);
    double margin = 0.0;
    for (std::size_t j = 0; j < cfg.d; ++j) margin += w[j] * (a[j] - b[j]);
    margin += cfg.noise * rng.logistic();
    bool a_wins = margin > 0.0;
    if (rng.bernoulli(model.flip_probability(g))) a_wins = !a_wins;
    if (!a_wins) std::swap(a, b);
    ex.feat_w = std::move(a);
    ex.feat_l = std::move(b);
    out.push_back(std::move(ex));
  }
  return Dataset(cfg.layout, cfg.d, std::move(out));
}

// ---------------------------------------------------------------------------
// CSV
// ---------------------------------------------------------------------------
//
// Line 1: `d,N,p_1..p_N,K` (names), line 2: their values, line 3: column
// names `x_0..x_{d-1},fw_0..,fl_0..,s_1..s_N,u`, then one example per line.
// Category values are 0-based.

namespace csv_detail {

inline std::vector<std::string_view> split_line(std::string_view line) {
  std::vector<std::string_view> out;
  std::size_t start = 0;
  while (true) {
    const auto comma = line.find(',', start);
    out.push_back(line.substr(start, comma == std::string_view::npos ? std::string_view::npos
                                                                      : comma - start));
    if (comma == std::string_view::npos) break;
    start = comma + 1;
  }
  if (!out.empty() && !out.back().empty() && out.back().back() == '\r')
    out.back().remove_suffix(1);
  return out;
}

inline double parse_double(std::string_view tok, std::size_t line) {
  double v = 0.0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw ParseError(line, "cannot parse number '" + std::string(tok) + "'");
  if (!std::isfinite(v)) throw ParseError(line, "non-finite value");
  return v;
}

inline std::size_t parse_index(std::string_view tok, std::size_t line) {
  std::size_t v = 0;
  const auto res = std::from_chars(tok.data(), tok.data() + tok.size(), v);
  if (res.ec != std::errc() || res.ptr != tok.data() + tok.size())
    throw ParseError(line, "cannot parse integer '" + std::string(tok) + "'");
  return v;
}

}  // namespace csv_detail

inline void write_csv(const Dataset& ds, std::ostream& os) {
  const auto& lay = ds.layout();
  const std::size_t N = lay.attribute_count();
  os << "d,N";
  for (std::size_t n = 1; n <= N; ++n) os << ",p_" << n;
  os << ",K\n" << ds.dim() << ',' << N;
  for (std::size_t c : lay.sensitive_dims) os << ',' << c;
  os << ',' << lay.unrestricted_card << '\n';
  for (const char* prefix : {"x_", "fw_", "fl_"})
    for (std::size_t j = 0; j < ds.dim(); ++j) os << prefix << j << ',';
  for (std::size_t n = 1; n <= N; ++n) os << "s_" << n << ',';
  os << "u\n";
  for (const auto& ex : ds.examples()) {
    for (const Vector* v : {&ex.x, &ex.feat_w, &ex.feat_l})
      for (double val : *v) os << format_double(val) << ',';
    for (std::size_t s : ex.s) os << s << ',';
    os << ex.u << '\n';
  }
}

inline Dataset read_csv(std::istream& is) {
  using namespace csv_detail;
  std::string line;
  std::size_t lineno = 0;
  auto next = [&](const char* what) {
    if (!std::getline(is, line)) throw ParseError(lineno + 1, std::string("missing ") + what);
    ++lineno;
  };
  next("header names");
  next("header values");
  const auto head = split_line(line);
  if (head.size() < 4) throw ParseError(lineno, "header needs d,N,p_1..p_N,K");
  const std::size_t d = parse_index(head[0], lineno);
  const std::size_t N = parse_index(head[1], lineno);
  if (head.size() != N + 3)
    throw ParseError(lineno, "header declares N=" + std::to_string(N) + " but has " +
                                 std::to_string(head.size()) + " fields");
  AttributeLayout layout;
  layout.sensitive_dims.clear();
  for (std::size_t n = 0; n < N; ++n) layout.sensitive_dims.push_back(parse_index(head[2 + n], lineno));
  layout.unrestricted_card = parse_index(head[2 + N], lineno);
  try {
    layout.validate();
    require(d >= 1, "d must be >= 1");
  } catch (const ValidationError& e) {
    throw ParseError(lineno, e.what());
  }
  next("column names");
  const std::size_t width = 3 * d + N + 1;
  if (split_line(line).size() != width)
    throw ParseError(lineno, "expected " + std::to_string(width) + " columns");

  std::vector<PreferenceExample> examples;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty() || line == "\r") continue;
    const auto tok = split_line(line);
    if (tok.size() != width)
      throw ParseError(lineno, "expected " + std::to_string(width) + " fields, got " +
                                   std::to_string(tok.size()));
    PreferenceExample ex;
    ex.x.resize(d);
    ex.feat_w.resize(d);
    ex.feat_l.resize(d);
    for (std::size_t j = 0; j < d; ++j) {
      ex.x[j] = parse_double(tok[j], lineno);
      ex.feat_w[j] = parse_double(tok[d + j], lineno);
      ex.feat_l[j] = parse_double(tok[2 * d + j], lineno);
    }
    ex.s.resize(N);
    for (std::size_t n = 0; n < N; ++n) {
      ex.s[n] = parse_index(tok[3 * d + n], lineno);
      if (ex.s[n] >= layout.sensitive_dims[n])
        throw ParseError(lineno, "s_" + std::to_string(n + 1) + "=" + std::to_string(ex.s[n]) +
                                     " out of range [0, " + std::to_string(layout.sensitive_dims[n]) + ")");
    }
    ex.u = parse_index(tok[3 * d + N], lineno);
    if (ex.u >= layout.unrestricted_card)
      throw ParseError(lineno, "u=" + std::to_string(ex.u) + " out of range");
    examples.push_back(std::move(ex));
  }
  return Dataset(std::move(layout), d, std::move(examples));
}

inline void save_csv(const Dataset& ds, const std::string& path) {
  std::ofstream os(path, std::ios::binary);
  if (!os) throw ValidationError("cannot open '" + path + "' for writing");
  write_csv(ds, os);
}

inline Dataset load_csv(const std::string& path) {
  std::ifstream is(path, std::ios::binary);
  if (!is) throw ValidationError("cannot open dataset '" + path + "'");
  return read_csv(is);
}

}  // namespace faro
