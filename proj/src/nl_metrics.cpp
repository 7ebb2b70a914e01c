#include "cvabench/nl_metrics.hpp"

#include <algorithm>
#include <charconv>
#include <cmath>
#include <set>
#include <sstream>

#include "cvabench/text.hpp"

namespace cvabench::nl {

double cosine(const Embedding& a, const Embedding& b) {
  double dot = 0.0, na = 0.0, nb = 0.0;
  if (!a.dense.empty() || !b.dense.empty()) {
    if (a.dense.size() != b.dense.size()) throw EmbeddingError("embedding dimensions differ");
    for (std::size_t i = 0; i < a.dense.size(); ++i) {
      dot += a.dense[i] * b.dense[i];
      na += a.dense[i] * a.dense[i];
      nb += b.dense[i] * b.dense[i];
    }
  } else {
    for (const auto& [k, v] : a.sparse) {
      na += v * v;
      if (auto it = b.sparse.find(k); it != b.sparse.end()) dot += v * it->second;
    }
    for (const auto& [k, v] : b.sparse) nb += v * v;
  }
  if (na <= 0.0 || nb <= 0.0) return 0.0;
  return std::clamp(dot / std::sqrt(na * nb), -1.0, 1.0);
}

namespace {

const std::map<std::string, std::string>& number_words() {
  static const std::map<std::string, std::string> m = {
      {"zero", "0"},     {"one", "1"},        {"two", "2"},       {"three", "3"},    {"four", "4"},
      {"five", "5"},     {"six", "6"},        {"seven", "7"},     {"eight", "8"},    {"nine", "9"},
      {"ten", "10"},     {"eleven", "11"},    {"twelve", "12"},   {"thirteen", "13"}, {"fourteen", "14"},
      {"fifteen", "15"}, {"sixteen", "16"},   {"seventeen", "17"}, {"eighteen", "18"}, {"nineteen", "19"},
      {"twenty", "20"},  {"thirty", "30"},    {"forty", "40"},    {"fifty", "50"},   {"sixty", "60"},
      {"seventy", "70"}, {"eighty", "80"},    {"ninety", "90"},   {"hundred", "100"}, {"half", "50"},
      {"double", "2"},   {"doubled", "2"},    {"twice", "2"}};
  return m;
}

const std::map<std::string, std::string>& irregular() {
  static const std::map<std::string, std::string> m = {
      {"rose", "rise"},   {"risen", "rise"},   {"grew", "grow"},     {"grown", "grow"},
      {"fell", "fall"},   {"fallen", "fall"},  {"shrank", "shrink"}, {"shrunk", "shrink"},
      {"sank", "sink"},   {"sunk", "sink"},    {"went", "go"},       {"better", "good"},
      {"worse", "bad"},   {"highest", "high"}, {"lowest", "low"},    {"percentage", "percent"},
      {"pct", "percent"}, {"%", "percent"}};
  return m;
}

// Stemmed forms.
const std::set<std::string>& up_words() {
  static const std::set<std::string> s = {"rise",  "grow",  "climb", "up",     "increas", "gain",  "improv",
                                          "jump",  "surg",  "higher", "boost", "soar",    "rais",  "expand",
                                          "exceed", "spike", "rebound", "accel"};
  return s;
}

const std::set<std::string>& down_words() {
  static const std::set<std::string> s = {"fall", "drop",   "declin", "down",  "decreas", "shrink", "lower",
                                          "dip",  "slump",  "worsen", "plung", "sink",    "fell",   "slid",
                                          "slide", "contract", "tumbl", "lose",  "loss",    "reduc",  "cut"};
  return s;
}

const std::set<std::string>& stopwords() {
  static const std::set<std::string> s = {
      "the", "a",   "an",   "and",  "or",    "of",   "in",    "on",    "at",   "to",    "for",  "by",
      "with", "from", "over", "per", "is",  "ar",   "wa",    "were",  "be",   "been",  "it",   "it",
      "thi", "that", "these", "those", "as", "than", "then", "there", "their", "our", "we", "you",
      "your", "i",   "they", "has",  "have", "had",  "do",   "doe",   "did",  "will",  "would", "can",
      "could", "should", "mai", "might", "also", "which", "who", "into", "about", "across", "vs", "versu",
      "while", "dure", "so", "but", "if", "not", "no", "thei", "here", "all", "each", "both", "show", "chart"};
  return s;
}

bool is_number_token(const std::string& t) {
  if (t.empty()) return false;
  double v;
  auto [p, ec] = std::from_chars(t.data(), t.data() + t.size(), v);
  return ec == std::errc() && p == t.data() + t.size();
}

std::string canonical_number(const std::string& t) {
  double v = std::stod(t);
  std::ostringstream os;
  os.precision(12);
  os << v;
  return os.str();
}

}  // namespace

std::vector<std::string> analyze(std::string_view input) {
  std::vector<std::string> out;
  for (auto w : text::words(input)) {
    if (auto it = number_words().find(w); it != number_words().end()) w = it->second;
    if (auto it = irregular().find(w); it != irregular().end()) w = it->second;
    if (is_number_token(w)) {
      out.push_back(canonical_number(w));
      continue;
    }
    std::string stem = text::porter_stem(w);
    if (up_words().count(stem)) stem = "increase";
    else if (down_words().count(stem)) stem = "decrease";
    out.push_back(stem);
  }
  return out;
}

bool is_stopword(std::string_view stemmed) { return stopwords().count(std::string(stemmed)) > 0; }

void LexicalEmbedder::fit(const std::vector<std::string>& corpus) {
  idf_.clear();
  std::map<std::string, int> df;
  for (const auto& doc : corpus) {
    std::set<std::string> terms;
    for (auto& t : analyze(doc)) terms.insert(t);
    for (const auto& t : terms) ++df[t];
  }
  double n = static_cast<double>(corpus.size());
  for (const auto& [t, d] : df) idf_[t] = std::log((1.0 + n) / (1.0 + d)) + 1.0;
  default_idf_ = corpus.empty() ? 1.0 : std::log(1.0 + n) + 1.0;
}

Embedding LexicalEmbedder::embed(std::string_view input) const {
  std::map<std::string, int> tf;
  for (auto& t : analyze(input)) {
    if (!is_stopword(t)) ++tf[t];
  }
  Embedding e;
  for (const auto& [t, n] : tf) {
    double idf = default_idf_;
    if (auto it = idf_.find(t); it != idf_.end()) idf = it->second;
    double w = (1.0 + std::log(static_cast<double>(n))) * idf * (is_number_token(t) ? 2.0 : 1.0);
    e.sparse["w:" + t] += w;
    if (is_number_token(t) || t.size() < 4) continue;
    std::string padded = "#" + t + "#";
    std::size_t grams = padded.size() - 2;
    for (std::size_t i = 0; i + 3 <= padded.size(); ++i) {
      e.sparse["g:" + padded.substr(i, 3)] += kTrigramWeight * w / std::sqrt(static_cast<double>(grams));
    }
  }
  return e;
}

// ---------------------------------------------------------------------------
// contradiction

namespace {

const std::map<std::string, std::string>& builtin_measures() {
  static const std::map<std::string, std::string> m = {
      {"sale", "sales"},      {"revenu", "sales"},   {"turnov", "sales"},  {"profit", "profit"},
      {"earn", "profit"},     {"incom", "profit"},   {"quantiti", "quantity"}, {"unit", "quantity"},
      {"volum", "quantity"},  {"cost", "cost"},      {"expens", "cost"},   {"spend", "cost"},
      {"margin", "margin"},   {"price", "price"},    {"discount", "discount"}};
  return m;
}

std::vector<std::string> split_sentences(std::string_view s) {
  std::vector<std::string> out;
  std::string cur;
  for (std::size_t i = 0; i < s.size(); ++i) {
    char c = s[i];
    bool end = c == '!' || c == '?' || c == ';' || c == '\n' ||
               (c == '.' && (i + 1 == s.size() || std::isspace(static_cast<unsigned char>(s[i + 1]))));
    if (end) {
      out.push_back(cur);
      cur.clear();
    } else {
      cur.push_back(c);
    }
  }
  if (!text::trim(cur).empty()) out.push_back(cur);
  return out;
}

}  // namespace

std::optional<std::string> LexicalContradictionChecker::measure_key(const std::vector<std::string>& tokens,
                                                                    std::size_t i, std::size_t& consumed) const {
  if (meta_) {
    std::size_t best_len = 0;
    std::string best;
    for (const auto& f : meta_->fields) {
      if (f.data_type != DataType::quantitative) continue;
      std::vector<std::string> names = {f.name};
      names.insert(names.end(), f.aliases.begin(), f.aliases.end());
      for (const auto& n : names) {
        auto phrase = analyze(n);
        if (phrase.empty() || phrase.size() <= best_len || i + phrase.size() > tokens.size()) continue;
        if (std::equal(phrase.begin(), phrase.end(), tokens.begin() + i)) {
          best_len = phrase.size();
          best = text::normalize_key(f.name);
        }
      }
    }
    if (best_len) {
      consumed = best_len;
      return best;
    }
  }
  if (auto it = builtin_measures().find(tokens[i]); it != builtin_measures().end()) {
    consumed = 1;
    return it->second;
  }
  return std::nullopt;
}

std::vector<Claim> LexicalContradictionChecker::claims(std::string_view input) const {
  std::vector<Claim> out;
  for (const auto& sentence : split_sentences(input)) {
    auto tokens = analyze(sentence);
    struct Hit {
      std::size_t pos;
      std::string key;
    };
    std::vector<Hit> measures;
    std::vector<std::pair<std::size_t, int>> dirs;
    for (std::size_t i = 0; i < tokens.size();) {
      std::size_t consumed = 0;
      if (auto k = measure_key(tokens, i, consumed)) {
        measures.push_back({i, *k});
        i += consumed;
        continue;
      }
      if (tokens[i] == "increase") dirs.emplace_back(i, 1);
      if (tokens[i] == "decrease") dirs.emplace_back(i, -1);
      ++i;
    }
    for (std::size_t m = 0; m < measures.size(); ++m) {
      std::size_t lo = measures[m].pos;
      std::size_t hi = m + 1 < measures.size() ? measures[m + 1].pos : tokens.size();
      int dir = 0;
      for (const auto& [p, d] : dirs) {
        if (p > lo && p < hi) {
          dir = d;
          break;
        }
      }
      if (dir == 0) {
        for (auto it = dirs.rbegin(); it != dirs.rend(); ++it) {
          if (it->first < lo) {
            dir = it->second;
            break;
          }
        }
      }
      out.push_back({measures[m].key, dir});
    }
  }
  return out;
}

std::optional<bool> LexicalContradictionChecker::contradicts(std::string_view expected,
                                                             std::string_view actual) const {
  auto ce = claims(expected);
  auto ca = claims(actual);
  std::set<std::string> me, ma;
  for (const auto& c : ce) me.insert(c.measure);
  for (const auto& c : ca) ma.insert(c.measure);
  if (!me.empty() && !ma.empty()) {
    bool overlap = std::any_of(me.begin(), me.end(), [&](const std::string& m) { return ma.count(m) > 0; });
    if (!overlap) return true;
  }
  auto direction = [](const std::vector<Claim>& cs, const std::string& m) {
    for (const auto& c : cs) {
      if (c.measure == m && c.direction != 0) return c.direction;
    }
    return 0;
  };
  for (const auto& m : me) {
    if (!ma.count(m)) continue;
    int de = direction(ce, m), da = direction(ca, m);
    if (de != 0 && da != 0 && de != da) return true;
  }
  return false;
}

std::optional<bool> JudgeContradictionChecker::contradicts(std::string_view expected, std::string_view actual) const {
  if (!judge_) return std::nullopt;
  std::string prompt =
      "Decide whether statement B contradicts statement A about the data: a different measure, an opposite "
      "trend, or incompatible numbers. Missing detail is not a contradiction.\n\nA: " +
      std::string(expected) + "\nB: " + std::string(actual) +
      "\n\nReply with only JSON: {\"contradiction\": true} or {\"contradiction\": false}";
  try {
    std::string raw = judge_(prompt);
    auto open = raw.find('{');
    auto close = raw.rfind('}');
    if (open == std::string::npos || close == std::string::npos || close < open) return std::nullopt;
    auto j = json::parse(raw.substr(open, close - open + 1), nullptr, false);
    if (j.is_discarded() || !j.is_object()) return std::nullopt;
    auto it = j.find("contradiction");
    if (it == j.end() || !it->is_boolean()) return std::nullopt;
    return it->get<bool>();
  } catch (const std::exception&) {
    return std::nullopt;
  }
}

std::optional<bool> ChainedContradictionChecker::contradicts(std::string_view expected,
                                                             std::string_view actual) const {
  for (const auto* c : chain_) {
    if (!c) continue;
    if (auto r = c->contradicts(expected, actual)) return r;
  }
  return std::nullopt;
}

MetricScore score_factual_grounding(std::string_view expected_text, std::string_view actual_text,
                                    const Embedder& embedder, const ContradictionChecker& checker) {
  MetricScore s;
  s.metric_id = std::string(metric_id::factual_grounding);
  s.expected_fragment = std::string(expected_text);
  s.actual_fragment = std::string(actual_text);
  if (text::trim(expected_text).empty()) {
    s.status = MetricStatus::unavailable;
    s.explanation = "Factual grounding: no expected explanation";
    return s;
  }
  if (text::trim(actual_text).empty()) {
    s.value = 0;
    s.explanation = "Factual grounding: the response has no explanation text";
    return s;
  }
  if (checker.contradicts(expected_text, actual_text).value_or(false)) {
    s.value = 0;
    s.explanation = "Factual grounding: the response contradicts the expected explanation";
    return s;
  }
  try {
    double sim = cosine(embedder.embed(expected_text), embedder.embed(actual_text));
    s.value = std::clamp(100.0 * sim, 0.0, 100.0);
    std::ostringstream os;
    os.precision(3);
    os << "Factual grounding: similarity " << sim << " (" << embedder.name() << ")";
    s.explanation = os.str();
  } catch (const std::exception& e) {
    s.status = MetricStatus::unavailable;
    s.explanation = std::string("Factual grounding: embedding failed: ") + e.what();
  }
  return s;
}

PRF nlg_prf(std::string_view reference, std::string_view candidate) {
  auto r = analyze(reference);
  auto c = analyze(candidate);
  if (r.empty() && c.empty()) return {1.0, 1.0, 1.0};
  if (r.empty() || c.empty()) return {0.0, 0.0, 0.0};
  std::map<std::string, int> rc;
  for (const auto& t : r) ++rc[t];
  std::size_t overlap = 0;
  for (const auto& t : c) {
    if (auto it = rc.find(t); it != rc.end() && it->second > 0) {
      --it->second;
      ++overlap;
    }
  }
  PRF p;
  p.precision = static_cast<double>(overlap) / c.size();
  p.recall = static_cast<double>(overlap) / r.size();
  p.f1 = overlap ? 2 * p.precision * p.recall / (p.precision + p.recall) : 0.0;
  return p;
}

std::vector<MetricScore> score_nlg(std::string_view reference, std::string_view candidate) {
  auto p = nlg_prf(reference, candidate);
  std::vector<MetricScore> out;
  for (auto [id, v] : {std::pair{metric_id::nlg_precision, p.precision}, std::pair{metric_id::nlg_recall, p.recall},
                       std::pair{metric_id::nlg_f1, p.f1}}) {
    MetricScore s;
    s.metric_id = std::string(id);
    s.value = 100.0 * v;
    s.explanation = "Token overlap after stemming";
    out.push_back(s);
  }
  return out;
}

// ---------------------------------------------------------------------------
// judge

JudgeRubric parse_rubric(const json& j, const std::string& origin) {
  std::vector<Violation> v;
  auto err = [&](const std::string& path, const std::string& msg) {
    v.push_back({Severity::error, origin, path, "rubric", msg});
  };
  JudgeRubric r;
  if (!j.is_object()) {
    err("", "rubric must be an object");
    throw ValidationError(v);
  }
  r.metric_id = j.value("metricId", "");
  if (!is_judge_metric(r.metric_id)) err("metricId", "unknown judge metric \"" + r.metric_id + "\"");
  r.title = j.value("title", r.metric_id);
  r.instructions = j.value("instructions", "");
  if (text::trim(r.instructions).empty()) err("instructions", "instructions must be non-empty");
  r.multi_turn_only = j.value("multiTurnOnly", r.metric_id == metric_id::followup_relevance);
  if (auto a = j.find("anchors"); a != j.end() && a->is_object()) {
    for (const auto& [k, val] : a->items()) {
      int score = 0;
      auto [p, ec] = std::from_chars(k.data(), k.data() + k.size(), score);
      if (ec != std::errc() || score < 1 || score > 5 || !val.is_string()) {
        err("anchors." + k, "anchor keys must be scores 1-5 with text values");
        continue;
      }
      r.anchors[score] = val.get<std::string>();
    }
  }
  auto ex = j.find("fewShotExamples");
  if (ex == j.end() || !ex->is_array() || ex->size() < 2) {
    err("fewShotExamples", "a rubric needs at least 2 few-shot examples");
  } else {
    for (std::size_t i = 0; i < ex->size(); ++i) {
      const auto& e = (*ex)[i];
      FewShotExample f;
      f.context = e.value("context", "");
      f.response = e.value("response", "");
      f.rationale = e.value("rationale", "");
      f.score = e.value("score", 0);
      if (f.response.empty() || f.score < 1 || f.score > 5 || f.rationale.empty()) {
        err("fewShotExamples[" + std::to_string(i) + "]", "example needs response, rationale and a score 1-5");
      }
      r.few_shot.push_back(std::move(f));
    }
  }
  if (!v.empty()) throw ValidationError(v);
  return r;
}

JudgeRubric load_rubric(const std::filesystem::path& path) { return parse_rubric(load_document(path), path.string()); }

std::map<std::string, JudgeRubric> load_rubrics(const std::filesystem::path& dir) {
  std::map<std::string, JudgeRubric> out;
  for (const auto& id : judge_metric_ids()) {
    auto p = dir / (id + ".json");
    if (std::filesystem::exists(p)) out[id] = load_rubric(p);
  }
  return out;
}

namespace {

std::vector<std::string> whitespace_words(std::string_view s) {
  std::vector<std::string> out;
  std::istringstream is{std::string(s)};
  std::string w;
  while (is >> w) out.push_back(w);
  return out;
}

std::string take_words(const std::vector<std::string>& ws, std::size_t n) {
  std::string out;
  for (std::size_t i = 0; i < ws.size() && i < n; ++i) {
    if (i) out += ' ';
    out += ws[i];
  }
  if (ws.size() > n) out += " ...";
  return out;
}

}  // namespace

std::pair<std::string, std::string> equalize_lengths(std::string_view a, std::string_view b) {
  auto wa = whitespace_words(a);
  auto wb = whitespace_words(b);
  std::size_t shorter = std::min(wa.size(), wb.size());
  auto limit = static_cast<std::size_t>(std::ceil(1.2 * static_cast<double>(shorter)));
  limit = std::max<std::size_t>(limit, 1);
  return {take_words(wa, limit), take_words(wb, limit)};
}

std::string build_judge_prompt(const JudgeRubric& rubric, const JudgeContext& ctx, std::mt19937_64& rng) {
  auto [reference, candidate] = equalize_lengths(ctx.expected_response, ctx.actual_response);
  std::ostringstream os;
  os << "You are grading a single response from a data analysis assistant on one criterion: " << rubric.title
     << ".\n\n"
     << rubric.instructions << "\n\n";
  if (!rubric.anchors.empty()) {
    os << "Scale:\n";
    for (const auto& [k, v] : rubric.anchors) os << k << " - " << v << "\n";
    os << "\n";
  }
  os << "Grade substance only. Style, tone, formatting and length must not change the score. "
        "The reference answer is one acceptable response; a different answer can still earn a high score.\n\n";

  std::vector<const FewShotExample*> shots;
  for (const auto& f : rubric.few_shot) shots.push_back(&f);
  std::shuffle(shots.begin(), shots.end(), rng);
  os << "Graded examples:\n";
  for (std::size_t i = 0; i < shots.size(); ++i) {
    os << "Example " << (i + 1) << "\n";
    if (!shots[i]->context.empty()) os << "Context: " << shots[i]->context << "\n";
    os << "Answer: " << shots[i]->response << "\n"
       << "Score: " << shots[i]->score << "\n"
       << "Reason: " << shots[i]->rationale << "\n\n";
  }

  if (!ctx.datasource_summary.empty()) os << ctx.datasource_summary << "\n";
  if (!ctx.prior_turns.empty()) {
    os << "Earlier turns:\n";
    for (std::size_t i = 0; i < ctx.prior_turns.size(); ++i) {
      os << "Turn " << (i + 1) << " user: " << ctx.prior_turns[i].utterance << "\n";
      if (!ctx.prior_turns[i].response.empty()) {
        os << "Turn " << (i + 1) << " assistant: " << ctx.prior_turns[i].response << "\n";
      }
    }
    os << "\n";
  }
  os << "Current request (turn " << ctx.turn_index << "): " << ctx.utterance << "\n\n";

  std::string ref_block = "<reference_answer>\n" + reference + "\n</reference_answer>\n";
  std::string cand_block = "<response_to_grade>\n" + candidate + "\n</response_to_grade>\n";
  if (std::uniform_int_distribution<int>(0, 1)(rng) == 0) {
    os << ref_block << "\n" << cand_block;
  } else {
    os << cand_block << "\n" << ref_block;
  }
  os << "\nGrade only the text in the response_to_grade block. Reply with only JSON: "
        "{\"score\": <integer 1-5>, \"rationale\": \"<one or two sentences>\"}\n";
  return os.str();
}

std::optional<JudgeVerdict> parse_judge_verdict(std::string_view raw) {
  std::string s(raw);
  for (std::size_t open = s.find('{'); open != std::string::npos; open = s.find('{', open + 1)) {
    for (std::size_t close = s.rfind('}'); close != std::string::npos && close > open;
         close = close == 0 ? std::string::npos : s.rfind('}', close - 1)) {
      auto j = json::parse(s.substr(open, close - open + 1), nullptr, false);
      if (j.is_discarded() || !j.is_object()) continue;
      auto sc = j.find("score");
      auto ra = j.find("rationale");
      if (sc == j.end() || ra == j.end() || !ra->is_string()) return std::nullopt;
      double score = 0;
      if (sc->is_number()) {
        score = sc->get<double>();
      } else if (sc->is_string()) {
        auto str = text::trim(sc->get<std::string>());
        auto [p, ec] = std::from_chars(str.data(), str.data() + str.size(), score);
        if (ec != std::errc() || p != str.data() + str.size()) return std::nullopt;
      } else {
        return std::nullopt;
      }
      if (score < 1 || score > 5 || std::floor(score) != score) return std::nullopt;
      std::string rationale = text::trim(ra->get<std::string>());
      if (rationale.empty()) return std::nullopt;
      return JudgeVerdict{score, rationale, std::string(raw)};
    }
  }
  return std::nullopt;
}

JudgeVerdict judge_metric(const JudgeRubric& rubric, const JudgeContext& ctx, const JudgeFn& judge,
                          std::uint64_t seed, int retries) {
  std::mt19937_64 rng(seed);
  std::string prompt = build_judge_prompt(rubric, ctx, rng);
  std::string last;
  for (int attempt = 0; attempt <= retries; ++attempt) {
    last = judge(prompt);
    if (auto v = parse_judge_verdict(last)) return *v;
    if (attempt == 0) {
      prompt += "\nYour previous reply could not be read. Reply with the JSON object only.\n";
    }
  }
  throw JudgeError("judge output for " + rubric.metric_id + " unparseable after " + std::to_string(retries + 1) +
                   " attempts: " + last.substr(0, 200));
}

double scale_judge_score(double raw) {
  if (!(raw >= 1.0 && raw <= 5.0)) throw std::out_of_range("judge score must be within 1-5");
  return raw * 20.0;
}

double scale_mean_judge_score(const std::vector<double>& raws) {
  if (raws.empty()) throw std::invalid_argument("no judge scores to average");
  double sum = 0;
  for (double r : raws) sum += r;
  return scale_judge_score(sum / raws.size());
}

MetricScore judge_metric_score(const JudgeRubric& rubric, const JudgeContext& ctx, const JudgeFn& judge,
                               std::uint64_t seed, int retries) {
  MetricScore s;
  s.metric_id = rubric.metric_id;
  if (rubric.multi_turn_only && ctx.turn_index < 2) {
    s.status = MetricStatus::not_applicable;
    s.explanation = rubric.title + " applies from the second turn on";
    return s;
  }
  auto v = judge_metric(rubric, ctx, judge, seed, retries);
  s.value = scale_judge_score(v.score);
  s.raw_judge_score = v.score;
  s.judge_rationale = v.rationale;
  s.explanation = rubric.title + ": " + std::to_string(static_cast<int>(v.score)) + "/5";
  s.actual_fragment = ctx.actual_response;
  s.expected_fragment = ctx.expected_response;
  return s;
}

std::optional<double> overall_nl_score(const std::vector<MetricScore>& scores) {
  double total = 0;
  std::size_t n = 0;
  for (const auto& s : scores) {
    if (!s.scored() || !is_nl_metric(s.metric_id)) continue;
    total += s.value;
    ++n;
  }
  if (n == 0) return std::nullopt;
  return total / n;
}

std::string datasource_summary(const Datasource& ds) {
  std::ostringstream os;
  os << "Datasource \"" << ds.title << "\" (" << ds.row_count() << " rows)\n";
  for (const auto& f : ds.fields) {
    os << "- " << f.name << " (" << to_string(f.data_type);
    if (!f.aliases.empty()) os << "; also called " << text::join(f.aliases, ", ");
    os << ")";
    if (f.data_type == DataType::quantitative) {
      double lo = INFINITY, hi = -INFINITY;
      for (const auto& v : f.values) {
        if (auto x = scalar_as_number(v)) {
          lo = std::min(lo, *x);
          hi = std::max(hi, *x);
        }
      }
      if (lo <= hi) os << " range " << scalar_to_string(lo) << " to " << scalar_to_string(hi);
    } else {
      std::set<std::string> distinct;
      for (const auto& v : f.values) {
        distinct.insert(scalar_to_string(v));
        if (distinct.size() > 5) break;
      }
      std::vector<std::string> sample(distinct.begin(), distinct.end());
      if (sample.size() > 5) sample.resize(5);
      os << " e.g. " << text::join(sample, ", ");
    }
    os << "\n";
  }
  return os.str();
}

}  // namespace cvabench::nl
