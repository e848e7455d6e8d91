#pragma once

#include <algorithm>
#include <array>
#include <cctype>
#include <cstddef>
#include <cstdint>
#include <fstream>
#include <istream>
#include <map>
#include <numeric>
#include <optional>
#include <ostream>
#include <random>
#include <sstream>
#include <string>
#include <string_view>
#include <unordered_set>
#include <variant>
#include <vector>

#include <json.hpp>

#include "precise/errors.hpp"
#include "precise/metric.hpp"

namespace precise {

// ---------------------------------------------------------------------------
// Annotation types
// ---------------------------------------------------------------------------

enum class Verdict { Relevant, Irrelevant };

/// Six ordered verbal confidence levels, least to most confident.
enum class Confidence {
  AboutEven,
  SlightlyBetterThanEven,
  Probably,
  PrettyGoodChance,
  HighlyLikely,
  AlmostCertain,
};

inline constexpr std::size_t kNumConfidenceLevels = 6;

inline constexpr std::array<std::string_view, kNumConfidenceLevels> kConfidencePhrases = {
    "About Even", "Slightly Better than Even", "Probably", "Pretty Good Chance", "Highly Likely",
    "Almost Certain"};

namespace detail {
inline bool iequals(std::string_view a, std::string_view b) {
  if (a.size() != b.size()) return false;
  for (std::size_t i = 0; i < a.size(); ++i) {
    if (std::tolower(static_cast<unsigned char>(a[i])) != std::tolower(static_cast<unsigned char>(b[i])))
      return false;
  }
  return true;
}

inline std::string_view trim(std::string_view s) {
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.front()))) s.remove_prefix(1);
  while (!s.empty() && std::isspace(static_cast<unsigned char>(s.back()))) s.remove_suffix(1);
  return s;
}
}  // namespace detail

inline std::string_view to_string(Confidence c) { return kConfidencePhrases[static_cast<std::size_t>(c)]; }
inline std::string_view to_string(Verdict v) { return v == Verdict::Relevant ? "relevant" : "irrelevant"; }

/// Case-insensitive match against the canonical phrases.
inline std::optional<Confidence> parse_confidence(std::string_view s) {
  s = detail::trim(s);
  for (std::size_t i = 0; i < kNumConfidenceLevels; ++i) {
    if (detail::iequals(s, kConfidencePhrases[i])) return static_cast<Confidence>(i);
  }
  return std::nullopt;
}

inline std::optional<Verdict> parse_verdict(std::string_view s) {
  s = detail::trim(s);
  if (detail::iequals(s, "relevant")) return Verdict::Relevant;
  if (detail::iequals(s, "irrelevant")) return Verdict::Irrelevant;
  return std::nullopt;
}

struct VerbalVerdict {
  Verdict verdict = Verdict::Relevant;
  Confidence confidence = Confidence::AboutEven;
  friend bool operator==(const VerbalVerdict&, const VerbalVerdict&) = default;
};

/// Either a numeric relevance probability or a verbal verdict.
using Annotation = std::variant<double, VerbalVerdict>;

struct RankedDoc {
  std::string doc_id;
  int rank = 0;
  Annotation annotation = 0.0;
  std::optional<bool> gold_relevant;
  friend bool operator==(const RankedDoc&, const RankedDoc&) = default;
};

enum class Split { Gold, Unlabeled };

inline std::string_view to_string(Split s) { return s == Split::Gold ? "gold" : "unlabeled"; }

struct QueryInstance {
  std::string query_id;
  Split split = Split::Unlabeled;
  std::vector<RankedDoc> docs;  // sorted by rank, ranks 1..K

  bool fully_labeled() const {
    return std::all_of(docs.begin(), docs.end(), [](const RankedDoc& d) { return d.gold_relevant.has_value(); });
  }

  /// Gold relevance by rank. Throws if any label is missing.
  BinaryVector gold_vector() const {
    BinaryVector y(docs.size());
    for (std::size_t i = 0; i < docs.size(); ++i) {
      if (!docs[i].gold_relevant) throw InputError("missing gold label for doc '" + docs[i].doc_id + "'",
                                                   std::nullopt, query_id);
      y.set(i, *docs[i].gold_relevant);
    }
    return y;
  }

  friend bool operator==(const QueryInstance&, const QueryInstance&) = default;
};

struct Dataset {
  std::size_t k = 0;
  std::vector<QueryInstance> gold;
  std::vector<QueryInstance> unlabeled;

  std::size_t n() const { return gold.size(); }
  std::size_t N() const { return unlabeled.size(); }
  std::size_t size() const { return gold.size() + unlabeled.size(); }

  friend bool operator==(const Dataset&, const Dataset&) = default;
};

// ---------------------------------------------------------------------------
// Validation
// ---------------------------------------------------------------------------

/// Sorts docs by rank and enforces the exact-K, ranks-1..K and label rules.
inline void normalize_and_validate(QueryInstance& q, std::size_t k, std::optional<std::size_t> line = std::nullopt) {
  if (q.query_id.empty()) throw InputError("empty query_id", line);
  if (q.docs.size() != k) {
    throw InputError("expected exactly " + std::to_string(k) + " ranked docs, found " +
                         std::to_string(q.docs.size()),
                     line, q.query_id);
  }
  std::sort(q.docs.begin(), q.docs.end(), [](const RankedDoc& a, const RankedDoc& b) { return a.rank < b.rank; });
  for (std::size_t i = 0; i < q.docs.size(); ++i) {
    const RankedDoc& d = q.docs[i];
    if (d.rank != static_cast<int>(i + 1)) {
      throw InputError("ranks must be unique and cover 1.." + std::to_string(k), line, q.query_id);
    }
    if (const double* p = std::get_if<double>(&d.annotation); p && !(*p >= 0.0 && *p <= 1.0)) {
      throw InputError("probability for doc '" + d.doc_id + "' outside [0,1]", line, q.query_id);
    }
    if (q.split == Split::Gold && !d.gold_relevant) {
      throw InputError("gold query is missing gold_relevant for doc '" + d.doc_id + "'", line, q.query_id);
    }
  }
}

// ---------------------------------------------------------------------------
// JSON lines
// ---------------------------------------------------------------------------

namespace detail {

using nlohmann::json;

inline Split parse_split(const json& j, std::size_t line, std::optional<std::string> qid) {
  if (!j.is_string()) throw InputError("'split' must be a string", line, qid);
  const auto s = j.get<std::string>();
  if (iequals(s, "gold")) return Split::Gold;
  if (iequals(s, "unlabeled") || iequals(s, "unlabelled")) return Split::Unlabeled;
  throw InputError("unknown split '" + s + "'", line, qid);
}

inline std::optional<bool> parse_label(const json& j, std::size_t line, const std::string& qid) {
  if (j.is_null()) return std::nullopt;
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number_integer()) {
    const auto v = j.get<long long>();
    if (v == 0 || v == 1) return v == 1;
  }
  throw InputError("'gold_relevant' must be a boolean", line, qid);
}

inline RankedDoc parse_doc(const json& j, std::size_t line, const std::string& qid) {
  if (!j.is_object()) throw InputError("doc entries must be objects", line, qid);
  RankedDoc d;
  if (!j.contains("doc_id") || !j["doc_id"].is_string()) throw InputError("doc is missing string 'doc_id'", line, qid);
  d.doc_id = j["doc_id"].get<std::string>();
  if (!j.contains("rank") || !j["rank"].is_number_integer()) {
    throw InputError("doc '" + d.doc_id + "' is missing integer 'rank'", line, qid);
  }
  d.rank = j["rank"].get<int>();

  const bool has_prob = j.contains("prob") && !j["prob"].is_null();
  const bool has_verbal = j.contains("verdict") || j.contains("confidence");
  if (has_prob == has_verbal) {
    throw InputError("doc '" + d.doc_id + "' needs exactly one of 'prob' or ('verdict','confidence')", line, qid);
  }
  if (has_prob) {
    if (!j["prob"].is_number()) throw InputError("'prob' must be numeric", line, qid);
    d.annotation = j["prob"].get<double>();
  } else {
    if (!j.contains("verdict") || !j.contains("confidence") || !j["verdict"].is_string() ||
        !j["confidence"].is_string()) {
      throw InputError("doc '" + d.doc_id + "' needs string 'verdict' and 'confidence'", line, qid);
    }
    const auto verdict = parse_verdict(j["verdict"].get<std::string>());
    if (!verdict) throw InputError("unknown verdict '" + j["verdict"].get<std::string>() + "'", line, qid);
    const auto conf = parse_confidence(j["confidence"].get<std::string>());
    if (!conf) throw InputError("unknown confidence '" + j["confidence"].get<std::string>() + "'", line, qid);
    d.annotation = VerbalVerdict{*verdict, *conf};
  }
  if (j.contains("gold_relevant")) d.gold_relevant = parse_label(j["gold_relevant"], line, qid);
  return d;
}

inline QueryInstance parse_query_json(const json& j, std::size_t line) {
  if (!j.is_object()) throw InputError("record must be a JSON object", line);
  QueryInstance q;
  if (!j.contains("query_id") || !j["query_id"].is_string()) throw InputError("missing string 'query_id'", line);
  q.query_id = j["query_id"].get<std::string>();
  if (!j.contains("split")) throw InputError("missing 'split'", line, q.query_id);
  q.split = parse_split(j["split"], line, q.query_id);
  if (!j.contains("docs") || !j["docs"].is_array()) throw InputError("missing array 'docs'", line, q.query_id);
  for (const auto& dj : j["docs"]) q.docs.push_back(parse_doc(dj, line, q.query_id));
  return q;
}

inline void add_query(Dataset& ds, QueryInstance q, std::unordered_set<std::string>& seen,
                      std::optional<std::size_t> line) {
  normalize_and_validate(q, ds.k, line);
  if (!seen.insert(q.query_id).second) throw InputError("duplicate query_id", line, q.query_id);
  (q.split == Split::Gold ? ds.gold : ds.unlabeled).push_back(std::move(q));
}

}  // namespace detail

inline nlohmann::json to_json(const QueryInstance& q) {
  nlohmann::json docs = nlohmann::json::array();
  for (const auto& d : q.docs) {
    nlohmann::json dj = {{"doc_id", d.doc_id}, {"rank", d.rank}};
    if (const double* p = std::get_if<double>(&d.annotation)) {
      dj["prob"] = *p;
    } else {
      const auto& v = std::get<VerbalVerdict>(d.annotation);
      dj["verdict"] = std::string(to_string(v.verdict));
      dj["confidence"] = std::string(to_string(v.confidence));
    }
    if (d.gold_relevant) dj["gold_relevant"] = *d.gold_relevant;
    docs.push_back(std::move(dj));
  }
  return {{"query_id", q.query_id}, {"split", std::string(to_string(q.split))}, {"docs", std::move(docs)}};
}

inline Dataset parse_jsonl(std::istream& in, std::size_t k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  Dataset ds;
  ds.k = k;
  std::unordered_set<std::string> seen;
  std::string text;
  std::size_t line = 0;
  while (std::getline(in, text)) {
    ++line;
    if (detail::trim(text).empty()) continue;
    nlohmann::json j;
    try {
      j = nlohmann::json::parse(text);
    } catch (const nlohmann::json::parse_error& e) {
      throw InputError(std::string("malformed JSON: ") + e.what(), line);
    }
    detail::add_query(ds, detail::parse_query_json(j, line), seen, line);
  }
  return ds;
}

inline void write_jsonl(const Dataset& ds, std::ostream& out) {
  for (const auto* part : {&ds.gold, &ds.unlabeled}) {
    for (const auto& q : *part) out << to_json(q).dump() << '\n';
  }
}

// ---------------------------------------------------------------------------
// CSV: query_id,split,doc_id,rank,prob,verdict,confidence,gold_relevant
// ---------------------------------------------------------------------------

inline constexpr std::array<std::string_view, 8> kCsvColumns = {
    "query_id", "split", "doc_id", "rank", "prob", "verdict", "confidence", "gold_relevant"};

namespace detail {

// RFC 4180 style: double-quoted fields may contain commas and "" escapes.
inline std::vector<std::string> split_csv_line(std::string_view line, std::size_t lineno) {
  std::vector<std::string> out;
  std::string cur;
  bool quoted = false;
  for (std::size_t i = 0; i < line.size(); ++i) {
    const char c = line[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < line.size() && line[i + 1] == '"') {
          cur += '"';
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cur += c;
      }
    } else if (c == '"') {
      quoted = true;
    } else if (c == ',') {
      out.push_back(std::move(cur));
      cur.clear();
    } else if (c != '\r') {
      cur += c;
    }
  }
  if (quoted) throw InputError("unterminated quoted field", lineno);
  out.push_back(std::move(cur));
  return out;
}

inline double parse_double_cell(const std::string& s, std::size_t line, const std::string& qid) {
  std::size_t pos = 0;
  double v = 0.0;
  try {
    v = std::stod(s, &pos);
  } catch (const std::exception&) {
    throw InputError("invalid number '" + s + "'", line, qid);
  }
  if (pos != s.size()) throw InputError("invalid number '" + s + "'", line, qid);
  return v;
}

inline int parse_int_cell(const std::string& s, std::size_t line, const std::string& qid) {
  std::size_t pos = 0;
  int v = 0;
  try {
    v = std::stoi(s, &pos);
  } catch (const std::exception&) {
    throw InputError("invalid integer '" + s + "'", line, qid);
  }
  if (pos != s.size()) throw InputError("invalid integer '" + s + "'", line, qid);
  return v;
}

inline bool parse_bool_cell(const std::string& s, std::size_t line, const std::string& qid) {
  if (iequals(s, "true") || s == "1") return true;
  if (iequals(s, "false") || s == "0") return false;
  throw InputError("invalid boolean '" + s + "'", line, qid);
}

}  // namespace detail

inline Dataset parse_csv(std::istream& in, std::size_t k) {
  if (k < 1) throw std::invalid_argument("k must be >= 1");
  std::string text;
  std::size_t line = 0;
  std::array<std::size_t, kCsvColumns.size()> col{};
  while (std::getline(in, text)) {
    ++line;
    if (!detail::trim(text).empty()) break;
  }
  if (line == 0 || detail::trim(text).empty()) throw InputError("CSV input has no header");
  {
    const auto header = detail::split_csv_line(text, line);
    for (std::size_t c = 0; c < kCsvColumns.size(); ++c) {
      auto it = std::find_if(header.begin(), header.end(),
                             [&](const std::string& h) { return detail::trim(h) == kCsvColumns[c]; });
      if (it == header.end()) throw InputError("CSV header lacks column '" + std::string(kCsvColumns[c]) + "'", line);
      col[c] = static_cast<std::size_t>(it - header.begin());
    }
  }

  struct Pending {
    QueryInstance query;
    std::size_t first_line;
  };
  std::vector<Pending> pending;
  std::map<std::string, std::size_t> index;

  while (std::getline(in, text)) {
    ++line;
    if (detail::trim(text).empty()) continue;
    auto cells = detail::split_csv_line(text, line);
    auto cell = [&](std::size_t c) -> std::string {
      const std::size_t i = col[c];
      return i < cells.size() ? std::string(detail::trim(cells[i])) : std::string();
    };
    const std::string qid = cell(0);
    if (qid.empty()) throw InputError("empty query_id", line);
    Split split;
    if (detail::iequals(cell(1), "gold")) {
      split = Split::Gold;
    } else if (detail::iequals(cell(1), "unlabeled") || detail::iequals(cell(1), "unlabelled")) {
      split = Split::Unlabeled;
    } else {
      throw InputError("unknown split '" + cell(1) + "'", line, qid);
    }

    auto [it, inserted] = index.emplace(qid, pending.size());
    if (inserted) pending.push_back({QueryInstance{qid, split, {}}, line});
    QueryInstance& q = pending[it->second].query;
    if (q.split != split) throw InputError("inconsistent split across rows", line, qid);

    RankedDoc d;
    d.doc_id = cell(2);
    if (d.doc_id.empty()) throw InputError("empty doc_id", line, qid);
    d.rank = detail::parse_int_cell(cell(3), line, qid);
    const std::string prob = cell(4), verdict = cell(5), confidence = cell(6), label = cell(7);
    const bool has_verbal = !verdict.empty() || !confidence.empty();
    if (prob.empty() == !has_verbal) {
      throw InputError("doc '" + d.doc_id + "' needs exactly one of prob or (verdict,confidence)", line, qid);
    }
    if (!prob.empty()) {
      d.annotation = detail::parse_double_cell(prob, line, qid);
    } else {
      const auto v = parse_verdict(verdict);
      if (!v) throw InputError("unknown verdict '" + verdict + "'", line, qid);
      const auto c = parse_confidence(confidence);
      if (!c) throw InputError("unknown confidence '" + confidence + "'", line, qid);
      d.annotation = VerbalVerdict{*v, *c};
    }
    if (!label.empty()) d.gold_relevant = detail::parse_bool_cell(label, line, qid);
    q.docs.push_back(std::move(d));
  }

  Dataset ds;
  ds.k = k;
  std::unordered_set<std::string> seen;
  for (auto& p : pending) detail::add_query(ds, std::move(p.query), seen, p.first_line);
  return ds;
}

/// Loads a dataset; files ending in `.csv` are read as CSV, anything else as
/// JSON lines.
inline Dataset load_dataset(const std::string& path, std::size_t k) {
  std::ifstream in(path);
  if (!in) throw InputError("cannot open '" + path + "'");
  const bool csv = path.size() >= 4 && detail::iequals(std::string_view(path).substr(path.size() - 4), ".csv");
  return csv ? parse_csv(in, k) : parse_jsonl(in, k);
}

inline void save_dataset(const Dataset& ds, const std::string& path) {
  std::ofstream out(path);
  if (!out) throw InputError("cannot write '" + path + "'");
  write_jsonl(ds, out);
}

// ---------------------------------------------------------------------------
// Gold/unlabeled splitting
// ---------------------------------------------------------------------------

/// Seeded uniform permutation of 0..size-1 (Fisher-Yates over mt19937_64).
inline std::vector<std::size_t> seeded_permutation(std::size_t size, std::uint64_t seed) {
  std::vector<std::size_t> order(size);
  std::iota(order.begin(), order.end(), std::size_t{0});
  std::mt19937_64 rng(seed);
  for (std::size_t i = size; i > 1; --i) {
    std::uniform_int_distribution<std::size_t> pick(0, i - 1);
    std::swap(order[i - 1], order[pick(rng)]);
  }
  return order;
}

/// All queries of `pool`, both splits, sorted by query_id.
inline std::vector<const QueryInstance*> normalized_queries(const Dataset& pool) {
  std::vector<const QueryInstance*> all;
  all.reserve(pool.size());
  for (const auto& q : pool.gold) all.push_back(&q);
  for (const auto& q : pool.unlabeled) all.push_back(&q);
  std::sort(all.begin(), all.end(), [](const QueryInstance* a, const QueryInstance* b) { return a->query_id < b->query_id; });
  return all;
}

/// Samples `n` gold queries uniformly without replacement from a fully
/// labeled pool. The remaining queries become the unlabeled split, in
/// permutation order, keeping their labels as hidden ground truth.
inline Dataset split_gold(const Dataset& pool, std::size_t n, std::uint64_t seed) {
  if (n < 1) throw PreconditionError("gold sample size must be >= 1");
  if (n > pool.size()) {
    throw PreconditionError("gold sample size " + std::to_string(n) + " exceeds pool size " +
                            std::to_string(pool.size()));
  }
  const auto all = normalized_queries(pool);
  for (const auto* q : all) {
    if (!q->fully_labeled()) throw InputError("pool query lacks gold labels", std::nullopt, q->query_id);
  }
  const auto order = seeded_permutation(all.size(), seed);
  Dataset out;
  out.k = pool.k;
  out.gold.reserve(n);
  out.unlabeled.reserve(all.size() - n);
  for (std::size_t i = 0; i < order.size(); ++i) {
    QueryInstance q = *all[order[i]];
    q.split = i < n ? Split::Gold : Split::Unlabeled;
    (i < n ? out.gold : out.unlabeled).push_back(std::move(q));
  }
  return out;
}

}  // namespace precise
