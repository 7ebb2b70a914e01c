#include "cvabench/stats.hpp"

#include <algorithm>
#include <cmath>
#include <numeric>
#include <set>
#include <sstream>

#include "cvabench/io.hpp"
#include "cvabench/text.hpp"

namespace cvabench::stats {

std::string StatResult::to_string(int precision) const {
  if (!value) return note.empty() ? kNoVariance : note;
  std::ostringstream os;
  os.setf(std::ios::fixed);
  os.precision(precision);
  os << *value;
  return os.str();
}

namespace {

std::size_t category_index(const std::vector<double>& cats, double v) {
  for (std::size_t i = 0; i < cats.size(); ++i) {
    if (std::abs(cats[i] - v) < 1e-9) return i;
  }
  std::ostringstream os;
  os << "rating " << v << " is not on the declared scale";
  throw std::invalid_argument(os.str());
}

std::pair<std::vector<double>, std::vector<double>> paired(const RatingSeries& a, const RatingSeries& b) {
  if (a.item_ids.size() != a.values.size() || b.item_ids.size() != b.values.size()) {
    throw std::invalid_argument("rating series has different numbers of ids and values");
  }
  std::map<std::string, double> bm;
  for (std::size_t i = 0; i < b.item_ids.size(); ++i) bm[b.item_ids[i]] = b.values[i];
  std::vector<double> x, y;
  for (std::size_t i = 0; i < a.item_ids.size(); ++i) {
    if (auto it = bm.find(a.item_ids[i]); it != bm.end()) {
      x.push_back(a.values[i]);
      y.push_back(it->second);
    }
  }
  return {x, y};
}

}  // namespace

StatResult weighted_kappa(const std::vector<double>& a, const std::vector<double>& b,
                          const std::vector<double>& categories) {
  if (a.size() != b.size()) throw std::invalid_argument("rating series differ in length");
  if (a.empty()) throw std::invalid_argument("no rated items");
  if (categories.size() < 2) return {std::nullopt, kNoVariance};
  const std::size_t k = categories.size();
  const double n = static_cast<double>(a.size());
  std::vector<std::vector<double>> obs(k, std::vector<double>(k, 0));
  std::vector<double> row(k, 0), col(k, 0);
  for (std::size_t i = 0; i < a.size(); ++i) {
    auto ia = category_index(categories, a[i]);
    auto ib = category_index(categories, b[i]);
    obs[ia][ib] += 1 / n;
    row[ia] += 1 / n;
    col[ib] += 1 / n;
  }
  double num = 0, den = 0;
  for (std::size_t i = 0; i < k; ++i) {
    for (std::size_t j = 0; j < k; ++j) {
      double d = std::abs(static_cast<double>(i) - static_cast<double>(j)) / static_cast<double>(k - 1);
      num += d * obs[i][j];
      den += d * row[i] * col[j];
    }
  }
  if (den <= 1e-15) return {std::nullopt, kNoVariance};
  return {1.0 - num / den, ""};
}

StatResult weighted_kappa(const RatingSeries& a, const RatingSeries& b, const std::vector<double>& categories) {
  auto [x, y] = paired(a, b);
  return weighted_kappa(x, y, categories);
}

std::vector<double> average_ranks(const std::vector<double>& v) {
  std::vector<std::size_t> idx(v.size());
  std::iota(idx.begin(), idx.end(), 0);
  std::stable_sort(idx.begin(), idx.end(), [&](auto l, auto r) { return v[l] < v[r]; });
  std::vector<double> ranks(v.size());
  for (std::size_t i = 0; i < idx.size();) {
    std::size_t j = i;
    while (j + 1 < idx.size() && v[idx[j + 1]] == v[idx[i]]) ++j;
    double avg = (static_cast<double>(i + 1) + static_cast<double>(j + 1)) / 2.0;
    for (std::size_t t = i; t <= j; ++t) ranks[idx[t]] = avg;
    i = j + 1;
  }
  return ranks;
}

double pearson(const std::vector<double>& x, const std::vector<double>& y) {
  double n = static_cast<double>(x.size());
  double mx = std::accumulate(x.begin(), x.end(), 0.0) / n;
  double my = std::accumulate(y.begin(), y.end(), 0.0) / n;
  double sxy = 0, sxx = 0, syy = 0;
  for (std::size_t i = 0; i < x.size(); ++i) {
    sxy += (x[i] - mx) * (y[i] - my);
    sxx += (x[i] - mx) * (x[i] - mx);
    syy += (y[i] - my) * (y[i] - my);
  }
  return sxy / std::sqrt(sxx * syy);
}

StatResult spearman_rho(const std::vector<double>& x, const std::vector<double>& y) {
  if (x.size() != y.size()) throw std::invalid_argument("series differ in length");
  if (x.size() < 2) throw std::invalid_argument("correlation needs at least 2 items");
  auto constant = [](const std::vector<double>& v) {
    return std::all_of(v.begin(), v.end(), [&](double d) { return d == v.front(); });
  };
  if (constant(x) || constant(y)) return {std::nullopt, kNoVariance};
  double r = pearson(average_ranks(x), average_ranks(y));
  return {std::clamp(r, -1.0, 1.0), ""};
}

StatResult spearman_rho(const RatingSeries& x, const RatingSeries& y) {
  auto [a, b] = paired(x, y);
  return spearman_rho(a, b);
}

PreferenceResult preference_scores(const std::vector<Ranking>& rankings, const std::vector<std::string>& models) {
  PreferenceResult out;
  std::map<std::string, double> sums;
  for (std::size_t p = 0; p < rankings.size(); ++p) {
    const auto& r = rankings[p];
    if (r.size() < 2) {
      throw std::invalid_argument("participant " + std::to_string(p + 1) + " ranked fewer than 2 models");
    }
    std::vector<std::string> names;
    std::vector<double> raw;
    for (const auto& [m, rank] : r) {
      names.push_back(m);
      raw.push_back(rank);
    }
    auto ranks = average_ranks(raw);
    double n = static_cast<double>(names.size());
    for (std::size_t i = 0; i < names.size(); ++i) {
      sums[names[i]] += (n - ranks[i]) / (n - 1);
      out.participants[names[i]]++;
    }
  }
  std::vector<std::string> order = models;
  if (order.empty()) {
    for (const auto& [m, _] : sums) order.push_back(m);
  }
  for (const auto& m : order) {
    auto it = sums.find(m);
    if (it == sums.end()) {
      out.notes.push_back(m + ": ranked by no participant, excluded");
      continue;
    }
    out.scores[m] = it->second / out.participants[m];
  }
  return out;
}

std::vector<std::vector<std::string>> parse_csv(const std::string& content) {
  std::vector<std::vector<std::string>> rows;
  std::vector<std::string> row;
  std::string cell;
  bool quoted = false, any = false;
  for (std::size_t i = 0; i < content.size(); ++i) {
    char c = content[i];
    if (quoted) {
      if (c == '"') {
        if (i + 1 < content.size() && content[i + 1] == '"') {
          cell.push_back('"');
          ++i;
        } else {
          quoted = false;
        }
      } else {
        cell.push_back(c);
      }
      continue;
    }
    if (c == '"') {
      quoted = true;
      any = true;
    } else if (c == ',') {
      row.push_back(std::move(cell));
      cell.clear();
      any = true;
    } else if (c == '\n' || c == '\r') {
      if (c == '\r' && i + 1 < content.size() && content[i + 1] == '\n') ++i;
      if (any || !cell.empty()) {
        row.push_back(std::move(cell));
        rows.push_back(std::move(row));
      }
      row.clear();
      cell.clear();
      any = false;
    } else {
      cell.push_back(c);
      any = true;
    }
  }
  if (any || !cell.empty()) {
    row.push_back(std::move(cell));
    rows.push_back(std::move(row));
  }
  return rows;
}

std::string csv_escape(const std::string& cell) {
  if (cell.find_first_of(",\"\n\r") == std::string::npos) return cell;
  std::string out = "\"";
  for (char c : cell) {
    if (c == '"') out += "\"\"";
    else out.push_back(c);
  }
  return out + "\"";
}

namespace {

struct Table {
  std::map<std::string, std::size_t> cols;
  std::vector<std::vector<std::string>> rows;
  std::filesystem::path path;

  std::size_t col(const std::string& name, bool required = true) const {
    auto it = cols.find(text::normalize_key(name));
    if (it == cols.end()) {
      if (!required) return std::string::npos;
      throw std::runtime_error(path.string() + ": missing column \"" + name + "\"");
    }
    return it->second;
  }
};

Table load_table(const std::filesystem::path& path) {
  Table t;
  t.path = path;
  auto rows = parse_csv(read_file(path));
  if (rows.empty()) throw std::runtime_error(path.string() + ": empty file");
  for (std::size_t i = 0; i < rows[0].size(); ++i) t.cols[text::normalize_key(text::trim(rows[0][i]))] = i;
  t.rows.assign(rows.begin() + 1, rows.end());
  return t;
}

double number_at(const Table& t, std::size_t line, std::size_t col) {
  const auto& row = t.rows[line];
  std::string s = col < row.size() ? text::trim(row[col]) : "";
  try {
    std::size_t used = 0;
    double v = std::stod(s, &used);
    if (used == s.size()) return v;
  } catch (const std::exception&) {
  }
  throw std::runtime_error(t.path.string() + ":" + std::to_string(line + 2) + ": \"" + s + "\" is not a number");
}

std::string cell_at(const Table& t, std::size_t line, std::size_t col) {
  const auto& row = t.rows[line];
  return col < row.size() ? text::trim(row[col]) : "";
}

}  // namespace

std::vector<Rating> load_ratings(const std::filesystem::path& path) {
  auto t = load_table(path);
  auto ci = t.col("itemId"), cr = t.col("raterId"), cm = t.col("metricId"), cv = t.col("value");
  std::vector<Rating> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    out.push_back({cell_at(t, i, ci), cell_at(t, i, cr), cell_at(t, i, cm), number_at(t, i, cv)});
  }
  return out;
}

std::vector<PreferenceRow> load_preferences(const std::filesystem::path& path) {
  auto t = load_table(path);
  auto cp = t.col("participantId"), cm = t.col("model"), cr = t.col("rank"), cq = t.col("rating", false);
  std::vector<PreferenceRow> out;
  for (std::size_t i = 0; i < t.rows.size(); ++i) {
    PreferenceRow r{cell_at(t, i, cp), cell_at(t, i, cm), number_at(t, i, cr), std::nullopt};
    if (cq != std::string::npos && !cell_at(t, i, cq).empty()) r.rating = number_at(t, i, cq);
    out.push_back(r);
  }
  return out;
}

std::vector<Ranking> rankings_from_rows(const std::vector<PreferenceRow>& rows) {
  std::map<std::string, Ranking> by;
  for (const auto& r : rows) by[r.participant_id][r.model] = r.rank;
  std::vector<Ranking> out;
  for (auto& [_, r] : by) out.push_back(std::move(r));
  return out;
}

namespace {

// metric -> rater -> item -> value
using Grid = std::map<std::string, std::map<std::string, std::map<std::string, double>>>;

Grid grid_of(const std::vector<Rating>& ratings) {
  Grid g;
  for (const auto& r : ratings) g[r.metric_id][r.rater_id][r.item_id] = r.value;
  return g;
}

std::pair<std::string, std::string> pick_raters(const std::map<std::string, std::map<std::string, double>>& raters,
                                                std::string a, std::string b) {
  auto it = raters.begin();
  if (a.empty() && it != raters.end()) a = (it++)->first;
  for (; b.empty() && it != raters.end(); ++it) {
    if (it->first != a) b = it->first;
  }
  return {a, b};
}

}  // namespace

std::vector<MetricStatRow> kappa_by_metric(const std::vector<Rating>& ratings, std::vector<double> scale,
                                           std::string rater_a, std::string rater_b) {
  std::vector<MetricStatRow> out;
  for (const auto& [metric, raters] : grid_of(ratings)) {
    auto [ra, rb] = pick_raters(raters, rater_a, rater_b);
    MetricStatRow row{metric, 0, {std::nullopt, "needs two raters"}};
    if (raters.count(ra) && raters.count(rb)) {
      std::vector<double> x, y;
      std::set<double> seen;
      for (const auto& [item, v] : raters.at(ra)) {
        if (auto it = raters.at(rb).find(item); it != raters.at(rb).end()) {
          x.push_back(v);
          y.push_back(it->second);
          seen.insert(v);
          seen.insert(it->second);
        }
      }
      row.items = x.size();
      std::vector<double> cats = scale.empty() ? std::vector<double>(seen.begin(), seen.end()) : scale;
      if (!x.empty()) row.result = weighted_kappa(x, y, cats);
    }
    out.push_back(row);
  }
  return out;
}

std::vector<MetricStatRow> spearman_by_metric(const std::vector<Rating>& ratings, const std::string& reference) {
  std::vector<MetricStatRow> out;
  for (const auto& [metric, raters] : grid_of(ratings)) {
    MetricStatRow row{metric, 0, {std::nullopt, "needs two raters"}};
    std::vector<double> x, y;
    if (!reference.empty() && raters.count(reference)) {
      for (const auto& [item, v] : raters.at(reference)) {
        double sum = 0;
        int n = 0;
        for (const auto& [rater, items] : raters) {
          if (rater == reference) continue;
          if (auto it = items.find(item); it != items.end()) {
            sum += it->second;
            ++n;
          }
        }
        if (n) {
          x.push_back(v);
          y.push_back(sum / n);
        }
      }
    } else if (reference.empty()) {
      auto [ra, rb] = pick_raters(raters, "", "");
      if (raters.count(ra) && raters.count(rb)) {
        for (const auto& [item, v] : raters.at(ra)) {
          if (auto it = raters.at(rb).find(item); it != raters.at(rb).end()) {
            x.push_back(v);
            y.push_back(it->second);
          }
        }
      }
    } else {
      row.result.note = "no ratings from " + reference;
    }
    row.items = x.size();
    if (x.size() >= 2) row.result = spearman_rho(x, y);
    else if (!x.empty()) row.result.note = "needs at least 2 items";
    out.push_back(row);
  }
  return out;
}

}  // namespace cvabench::stats
