#include "nemo/dataset.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <fstream>
#include <sstream>

#include "nemo/errors.hpp"
#include "nemo/random.hpp"

namespace nemo {

std::vector<Interaction> Dataset::interaction_list() const {
  std::vector<Interaction> out;
  out.reserve(interactions.nnz());
  for (const auto& t : interactions.triplets()) out.push_back({t.row, t.col});
  return out;
}

void Dataset::validate() const {
  if (user_features.rows() != num_users || item_features.rows() != num_items) {
    throw ContractError("dataset: feature rows do not match user/item counts");
  }
  if (user_features.cols() < 1 || item_features.cols() < 1) throw ContractError("dataset: feature dimension must be >= 1");
  if (social.rows() != num_users || social.cols() != num_users) throw ContractError("dataset: social matrix shape");
  if (interactions.rows() != num_users || interactions.cols() != num_items) {
    throw ContractError("dataset: interaction matrix shape");
  }
  for (std::size_t u = 0; u < num_users; ++u) {
    if (social.contains(u, u)) throw ContractError("dataset: social graph has a self-loop at " + std::to_string(u));
  }
  for (double v : interactions.values()) {
    if (v != 1.0) throw ContractError("dataset: interaction values must be 1");
  }
}

Dataset make_dataset(DenseMatrix user_features, DenseMatrix item_features, std::span<const Interaction> interactions,
                     std::span<const std::pair<std::uint32_t, std::uint32_t>> social_edges) {
  Dataset d;
  d.num_users = user_features.rows();
  d.num_items = item_features.rows();
  d.user_features = std::move(user_features);
  d.item_features = std::move(item_features);

  std::vector<Interaction> pairs(interactions.begin(), interactions.end());
  std::sort(pairs.begin(), pairs.end());
  pairs.erase(std::unique(pairs.begin(), pairs.end()), pairs.end());
  std::vector<Triplet> rt;
  rt.reserve(pairs.size());
  for (const auto& p : pairs) rt.push_back({p.user, p.item, 1.0});
  d.interactions = SparseMatrix::from_triplets(d.num_users, d.num_items, std::move(rt));

  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  for (auto [a, b] : social_edges) {
    if (a == b) continue;
    edges.emplace_back(a, b);
    edges.emplace_back(b, a);
  }
  std::sort(edges.begin(), edges.end());
  edges.erase(std::unique(edges.begin(), edges.end()), edges.end());
  std::vector<Triplet> st;
  st.reserve(edges.size());
  for (auto [a, b] : edges) st.push_back({a, b, 1.0});
  d.social = SparseMatrix::from_triplets(d.num_users, d.num_users, std::move(st));
  d.validate();
  return d;
}

// ---- UserItemIndex --------------------------------------------------------

UserItemIndex::UserItemIndex(std::size_t num_users, std::span<const Interaction> pairs) : items_(num_users) {
  for (const auto& p : pairs) items_.at(p.user).push_back(p.item);
  for (auto& v : items_) {
    std::sort(v.begin(), v.end());
    v.erase(std::unique(v.begin(), v.end()), v.end());
  }
}

bool UserItemIndex::contains(std::size_t user, std::uint32_t item) const {
  const auto& v = items_.at(user);
  return std::binary_search(v.begin(), v.end(), item);
}

// ---- Text I/O -------------------------------------------------------------

namespace {

std::vector<std::string> read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw IngestionError(path, 0, "cannot open file");
  std::vector<std::string> lines;
  std::string line;
  while (std::getline(in, line)) {
    if (!line.empty() && line.back() == '\r') line.pop_back();
    lines.push_back(std::move(line));
  }
  return lines;
}

bool blank(std::string_view s) { return s.find_first_not_of(" \t") == std::string_view::npos; }

std::vector<std::string_view> split_on(std::string_view s, char sep) {
  std::vector<std::string_view> out;
  while (true) {
    const auto pos = s.find(sep);
    out.push_back(s.substr(0, pos));
    if (pos == std::string_view::npos) break;
    s = s.substr(pos + 1);
  }
  return out;
}

std::uint64_t parse_id(std::string_view field, const std::string& path, std::size_t line) {
  std::uint64_t v = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (field.empty() || ec != std::errc() || ptr != end) {
    throw IngestionError(path, line, "expected a non-negative integer id, got '" + std::string(field) + "'");
  }
  return v;
}

double parse_real(std::string_view field, const std::string& path, std::size_t line) {
  double v = 0;
  const auto* end = field.data() + field.size();
  auto [ptr, ec] = std::from_chars(field.data(), end, v);
  if (field.empty() || ec != std::errc() || ptr != end || !std::isfinite(v)) {
    throw IngestionError(path, line, "expected a finite decimal, got '" + std::string(field) + "'");
  }
  return v;
}

DenseMatrix load_features(const std::string& path) {
  const auto lines = read_lines(path);
  std::size_t first = 0;
  while (first < lines.size() && blank(lines[first])) ++first;
  if (first == lines.size()) throw IngestionError(path, 0, "empty file");
  const auto header = split_on(lines[first], '\t');
  if (header.size() != 2) throw IngestionError(path, first + 1, "expected header 'count<TAB>dim'");
  const auto count = parse_id(header[0], path, first + 1);
  const auto dim = parse_id(header[1], path, first + 1);
  if (dim < 1) throw IngestionError(path, first + 1, "feature dimension must be >= 1");

  DenseMatrix m(count, dim);
  std::size_t row = 0;
  for (std::size_t ln = first + 1; ln < lines.size(); ++ln) {
    if (blank(lines[ln])) continue;
    if (row == count) throw IngestionError(path, ln + 1, "more rows than the declared count " + std::to_string(count));
    std::size_t col = 0;
    for (auto field : split_on(lines[ln], ' ')) {
      if (field.empty()) continue;
      if (col == dim) throw IngestionError(path, ln + 1, "row has more than " + std::to_string(dim) + " values");
      m(row, col++) = parse_real(field, path, ln + 1);
    }
    if (col != dim) {
      throw IngestionError(path, ln + 1, "row has " + std::to_string(col) + " values, expected " + std::to_string(dim));
    }
    ++row;
  }
  if (row != count) {
    throw IngestionError(path, lines.size(), "declared " + std::to_string(count) + " rows, found " + std::to_string(row));
  }
  return m;
}

/// Parses `a<TAB>b[<TAB>...]` lines into id pairs with bounds checks.
template <class F>
std::size_t read_pairs(const std::string& path, std::uint64_t limit_a, std::uint64_t limit_b, const char* what_b,
                       F&& emit) {
  const auto lines = read_lines(path);
  std::size_t count = 0;
  for (std::size_t ln = 0; ln < lines.size(); ++ln) {
    if (blank(lines[ln])) continue;
    const auto fields = split_on(lines[ln], '\t');
    if (fields.size() < 2) throw IngestionError(path, ln + 1, "expected at least two tab-separated ids");
    const auto a = parse_id(fields[0], path, ln + 1);
    const auto b = parse_id(fields[1], path, ln + 1);
    if (a >= limit_a) {
      throw IngestionError(path, ln + 1, "user id " + std::to_string(a) + " out of range [0," + std::to_string(limit_a) + ")");
    }
    if (b >= limit_b) {
      throw IngestionError(path, ln + 1, std::string(what_b) + " id " + std::to_string(b) + " out of range [0," +
                                             std::to_string(limit_b) + ")");
    }
    emit(static_cast<std::uint32_t>(a), static_cast<std::uint32_t>(b));
    ++count;
  }
  return count;
}

std::string format_real(double v) {
  char buf[32];
  auto [ptr, ec] = std::to_chars(buf, buf + sizeof(buf), v);
  return std::string(buf, ptr);
}

void write_file(const std::string& path, const std::string& content) {
  std::ofstream out(path, std::ios::binary);
  if (!out) throw IngestionError(path, 0, "cannot open for writing");
  out << content;
  if (!out) throw IngestionError(path, 0, "write failed");
}

std::string features_text(const DenseMatrix& m) {
  std::ostringstream ss;
  ss << m.rows() << '\t' << m.cols() << '\n';
  for (std::size_t r = 0; r < m.rows(); ++r) {
    for (std::size_t c = 0; c < m.cols(); ++c) ss << (c ? " " : "") << format_real(m(r, c));
    ss << '\n';
  }
  return ss.str();
}

}  // namespace

Dataset load_dataset(const DatasetPaths& paths, LoadReport* report) {
  LoadReport local;
  DenseMatrix ufeat = load_features(paths.user_features);
  DenseMatrix ifeat = load_features(paths.item_features);
  const auto n = ufeat.rows();
  const auto m = ifeat.rows();

  std::vector<Interaction> ratings;
  const auto rcount = read_pairs(paths.ratings, n, m, "item",
                                 [&](std::uint32_t u, std::uint32_t i) { ratings.push_back({u, i}); });
  if (rcount == 0) throw IngestionError(paths.ratings, 0, "empty file");

  std::vector<std::pair<std::uint32_t, std::uint32_t>> edges;
  read_pairs(paths.social, n, n, "user", [&](std::uint32_t a, std::uint32_t b) {
    if (a == b) {
      ++local.self_loops_dropped;
      return;
    }
    edges.emplace_back(std::min(a, b), std::max(a, b));
  });

  {
    auto sorted = ratings;
    std::sort(sorted.begin(), sorted.end());
    local.duplicate_ratings = sorted.size() - static_cast<std::size_t>(std::unique(sorted.begin(), sorted.end()) - sorted.begin());
    auto e = edges;
    std::sort(e.begin(), e.end());
    local.duplicate_social_edges = e.size() - static_cast<std::size_t>(std::unique(e.begin(), e.end()) - e.begin());
  }

  Dataset d = make_dataset(std::move(ufeat), std::move(ifeat), ratings, edges);
  if (report) *report = local;
  return d;
}

void save_dataset(const Dataset& dataset, const DatasetPaths& paths) {
  std::ostringstream ratings;
  for (const auto& p : dataset.interaction_list()) ratings << p.user << '\t' << p.item << '\n';
  write_file(paths.ratings, ratings.str());

  std::ostringstream social;
  for (const auto& t : dataset.social.triplets()) {
    if (t.row < t.col) social << t.row << '\t' << t.col << '\n';
  }
  write_file(paths.social, social.str());
  write_file(paths.user_features, features_text(dataset.user_features));
  write_file(paths.item_features, features_text(dataset.item_features));
}

// ---- Split ----------------------------------------------------------------

DatasetSplit split_interactions(const Dataset& dataset, std::uint64_t seed) {
  auto pairs = dataset.interaction_list();
  const std::size_t n = pairs.size();
  if (n < 10) throw ContractError("split: need at least 10 interactions, have " + std::to_string(n));

  Rng rng(stream_seed(seed, Stream::split));
  std::shuffle(pairs.begin(), pairs.end(), rng);

  const auto n_val = static_cast<std::size_t>(std::llround(static_cast<double>(n) * 0.1));
  const auto n_test = n_val;
  const auto n_train = n - n_val - n_test;

  DatasetSplit s;
  s.seed = seed;
  s.train.assign(pairs.begin(), pairs.begin() + static_cast<std::ptrdiff_t>(n_train));
  s.validation.assign(pairs.begin() + static_cast<std::ptrdiff_t>(n_train),
                      pairs.begin() + static_cast<std::ptrdiff_t>(n_train + n_val));
  s.test.assign(pairs.begin() + static_cast<std::ptrdiff_t>(n_train + n_val), pairs.end());
  std::sort(s.train.begin(), s.train.end());
  std::sort(s.validation.begin(), s.validation.end());
  std::sort(s.test.begin(), s.test.end());
  return s;
}

}  // namespace nemo
