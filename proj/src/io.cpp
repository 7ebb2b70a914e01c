#include "cvabench/io.hpp"

#include <yaml-cpp/yaml.h>

#include <unistd.h>

#include <algorithm>
#include <atomic>
#include <cctype>
#include <cmath>
#include <fstream>
#include <regex>
#include <set>
#include <sstream>
#include <unordered_map>
#include <unordered_set>

#include "cvabench/text.hpp"

namespace cvabench {

namespace fs = std::filesystem;

std::string Violation::to_string() const {
  std::string out = severity == Severity::error ? "error: " : "warning: ";
  if (!file.empty()) {
    out += file;
    out += path.empty() ? ": " : ":";
  }
  if (!path.empty()) {
    out += path + ": ";
  }
  out += message;
  if (!rule.empty()) {
    out += " [" + rule + "]";
  }
  return out;
}

namespace {

std::string summarize(const std::vector<Violation>& violations) {
  std::string out;
  for (const auto& v : violations) {
    if (!out.empty()) out += "\n";
    out += v.to_string();
  }
  return out;
}

std::string join_path(const std::string& base, const std::string& key) {
  if (base.empty()) return key;
  if (!key.empty() && key.front() == '[') return base + key;
  return base + "." + key;
}

std::string idx(std::size_t i) { return "[" + std::to_string(i) + "]"; }

}  // namespace

ValidationError::ValidationError(std::vector<Violation> violations)
    : std::runtime_error(summarize(violations)), violations_(std::move(violations)) {}

// ---------------------------------------------------------------------------
// files

std::string read_file(const fs::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) {
    throw std::runtime_error("cannot open " + path.string());
  }
  std::ostringstream ss;
  ss << in.rdbuf();
  return ss.str();
}

void write_file_atomic(const fs::path& path, const std::string& content) {
  if (path.has_parent_path()) {
    fs::create_directories(path.parent_path());
  }
  static std::atomic<unsigned> counter{0};
  fs::path tmp = path;
  tmp += ".tmp" + std::to_string(::getpid()) + "-" + std::to_string(counter++);
  {
    std::ofstream out(tmp, std::ios::binary | std::ios::trunc);
    if (!out) {
      throw std::runtime_error("cannot write " + tmp.string());
    }
    out << content;
    out.flush();
    if (!out) {
      throw std::runtime_error("write failed for " + tmp.string());
    }
  }
  std::error_code ec;
  fs::rename(tmp, path, ec);
  if (ec) {
    fs::remove(tmp);
    throw std::runtime_error("cannot rename into " + path.string() + ": " + ec.message());
  }
}

// ---------------------------------------------------------------------------
// YAML <-> JSON

namespace {

json yaml_scalar(const YAML::Node& n) {
  const std::string& s = n.Scalar();
  if (n.Tag() == "!") {
    return s;  // quoted
  }
  if (s.empty() || s == "~" || s == "null" || s == "Null" || s == "NULL") return nullptr;
  if (s == "true" || s == "True" || s == "TRUE") return true;
  if (s == "false" || s == "False" || s == "FALSE") return false;
  static const std::regex int_re(R"(^[-+]?\d+$)");
  static const std::regex float_re(R"(^[-+]?(\d+\.?\d*|\.\d+)([eE][-+]?\d+)?$)");
  if (std::regex_match(s, int_re)) {
    try {
      return std::stoll(s);
    } catch (const std::out_of_range&) {
      return std::stod(s);
    }
  }
  if (std::regex_match(s, float_re)) {
    return std::stod(s);
  }
  return s;
}

json yaml_to_json(const YAML::Node& n) {
  switch (n.Type()) {
    case YAML::NodeType::Null:
    case YAML::NodeType::Undefined:
      return nullptr;
    case YAML::NodeType::Scalar:
      return yaml_scalar(n);
    case YAML::NodeType::Sequence: {
      json arr = json::array();
      for (const auto& item : n) arr.push_back(yaml_to_json(item));
      return arr;
    }
    case YAML::NodeType::Map: {
      json obj = json::object();
      for (const auto& kv : n) obj[kv.first.as<std::string>()] = yaml_to_json(kv.second);
      return obj;
    }
  }
  return nullptr;
}

void emit_yaml(YAML::Emitter& out, const json& j) {
  switch (j.type()) {
    case json::value_t::null:
      out << YAML::Null;
      break;
    case json::value_t::boolean:
      out << j.get<bool>();
      break;
    case json::value_t::number_integer:
    case json::value_t::number_unsigned:
    case json::value_t::number_float:
      out << j.dump();
      break;
    case json::value_t::string:
      out << YAML::DoubleQuoted << j.get<std::string>();
      break;
    case json::value_t::array:
      out << YAML::BeginSeq;
      for (const auto& item : j) emit_yaml(out, item);
      out << YAML::EndSeq;
      break;
    case json::value_t::object:
      out << YAML::BeginMap;
      for (const auto& [k, v] : j.items()) {
        out << YAML::Key << k << YAML::Value;
        emit_yaml(out, v);
      }
      out << YAML::EndMap;
      break;
    default:
      out << YAML::Null;
  }
}

}  // namespace

json parse_document(const std::string& content, const fs::path& origin) {
  auto ext = text::to_lower(origin.extension().string());
  bool yaml = false;
  if (ext == ".yaml" || ext == ".yml") {
    yaml = true;
  } else if (ext != ".json") {
    auto pos = content.find_first_not_of(" \t\r\n");
    yaml = pos == std::string::npos || (content[pos] != '{' && content[pos] != '[');
  }
  auto where = origin.empty() ? std::string("<input>") : origin.string();
  if (!yaml) {
    try {
      return json::parse(content);
    } catch (const json::parse_error& e) {
      throw ValidationError({Violation{Severity::error, where, "", "syntax",
                                       std::string("invalid JSON: ") + e.what()}});
    }
  }
  try {
    return yaml_to_json(YAML::Load(content));
  } catch (const YAML::Exception& e) {
    throw ValidationError(
        {Violation{Severity::error, where, "", "syntax", std::string("invalid YAML: ") + e.what()}});
  }
}

json load_document(const fs::path& path) {
  if (!fs::exists(path)) {
    throw ValidationError(
        {Violation{Severity::error, path.string(), "", "exists", "file does not exist"}});
  }
  return parse_document(read_file(path), path);
}

std::string to_yaml(const json& doc) {
  YAML::Emitter out;
  emit_yaml(out, doc);
  return std::string(out.c_str()) + "\n";
}

// ---------------------------------------------------------------------------
// scalars

json scalar_to_json(const Scalar& v) {
  if (std::holds_alternative<std::monostate>(v)) return nullptr;
  if (const auto* b = std::get_if<bool>(&v)) return *b;
  if (const auto* d = std::get_if<double>(&v)) {
    if (std::isfinite(*d) && std::floor(*d) == *d && std::fabs(*d) < 9e15) {
      return static_cast<std::int64_t>(*d);
    }
    return *d;
  }
  return std::get<std::string>(v);
}

Scalar scalar_from_json(const json& j) {
  if (j.is_null()) return std::monostate{};
  if (j.is_boolean()) return j.get<bool>();
  if (j.is_number()) return j.get<double>();
  if (j.is_string()) return j.get<std::string>();
  return j.dump();
}

// ---------------------------------------------------------------------------
// VizSpec

namespace {

class IssueSink {
 public:
  IssueSink(std::vector<Violation>& out, std::string file) : out_(out), file_(std::move(file)) {}
  void error(const std::string& path, const std::string& rule, const std::string& message) {
    out_.push_back(Violation{Severity::error, file_, path, rule, message});
  }
  void warning(const std::string& path, const std::string& rule, const std::string& message) {
    out_.push_back(Violation{Severity::warning, file_, path, rule, message});
  }

 private:
  std::vector<Violation>& out_;
  std::string file_;
};

std::optional<std::string> get_string(const json& obj, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    auto it = obj.find(k);
    if (it != obj.end() && it->is_string()) return it->get<std::string>();
  }
  return std::nullopt;
}

const json* find_key(const json& obj, std::initializer_list<const char*> keys) {
  for (const char* k : keys) {
    auto it = obj.find(k);
    if (it != obj.end() && !it->is_null()) return &*it;
  }
  return nullptr;
}

std::optional<TooltipField> parse_tooltip_entry(const json& j, IssueSink& sink,
                                                const std::string& path) {
  TooltipField t;
  if (j.is_string()) {
    t.field = j.get<std::string>();
    return t;
  }
  if (!j.is_object()) {
    sink.error(path, "type", "tooltip entry must be a field name or object");
    return std::nullopt;
  }
  t.field = get_string(j, {"field"}).value_or("");
  if (auto agg = get_string(j, {"aggregate"})) {
    t.aggregate = parse_aggregate(*agg);
    if (!t.aggregate) {
      sink.error(join_path(path, "aggregate"), "enum", "unknown aggregate \"" + *agg + "\"");
    }
  }
  t.format = get_string(j, {"format", "unit"}).value_or("");
  if (t.field.empty() && !(t.aggregate && *t.aggregate == Aggregate::count)) {
    sink.error(path, "required", "tooltip entry has no field");
    return std::nullopt;
  }
  return t;
}

// Channel-level sort as written in Vega-Lite; resolved after all channels are known.
struct PendingSort {
  Channel channel;
  json value;
  std::string path;
};

std::optional<EncodingBinding> parse_binding(const json& j, Channel channel, IssueSink& sink,
                                             const std::string& path,
                                             std::vector<PendingSort>& pending) {
  EncodingBinding b;
  if (j.is_string()) {
    b.field = j.get<std::string>();
    return b;
  }
  if (!j.is_object()) {
    sink.error(path, "type", "channel definition must be an object");
    return std::nullopt;
  }
  b.field = get_string(j, {"field"}).value_or("");
  if (auto agg = get_string(j, {"aggregate"})) {
    b.aggregate = parse_aggregate(*agg);
    if (!b.aggregate) {
      sink.error(join_path(path, "aggregate"), "enum", "unknown aggregate \"" + *agg + "\"");
    }
  }
  std::optional<std::string> scale_name;
  if (const auto* scale = find_key(j, {"scale"}); scale && scale->is_object()) {
    scale_name = get_string(*scale, {"type"});
    if (auto z = scale->find("zero"); z != scale->end() && z->is_boolean()) b.zero = z->get<bool>();
  }
  if (!scale_name) scale_name = get_string(j, {"scaleType"});
  if (auto z = j.find("zeroBaseline"); z != j.end() && z->is_boolean()) b.zero = z->get<bool>();
  if (scale_name) {
    auto key = text::to_lower(*scale_name);
    if (key == "band" || key == "point") key = "ordinal";
    if (key == "utc") key = "time";
    b.scale = parse_scale_type(key);
    if (!b.scale) {
      sink.error(join_path(path, "scale.type"), "enum", "unknown scale type \"" + *scale_name + "\"");
    }
  }
  if (b.field.empty() && !(b.aggregate && *b.aggregate == Aggregate::count)) {
    sink.error(path, "required", "channel " + std::string(to_string(channel)) + " has no field");
    return std::nullopt;
  }
  if (auto s = j.find("sort"); s != j.end() && !s->is_null()) {
    pending.push_back(PendingSort{channel, *s, join_path(path, "sort")});
  }
  return b;
}

std::optional<FilterClause> parse_filter(const json& j, IssueSink& sink, const std::string& path) {
  if (!j.is_object()) {
    sink.error(path, "type", "filter must be an object");
    return std::nullopt;
  }
  FilterClause f;
  auto field = get_string(j, {"field"});
  if (!field || text::trim(*field).empty()) {
    sink.error(path, "required", "filter has no field");
    return std::nullopt;
  }
  f.field = *field;
  auto read_values = [&](const json& v) {
    if (v.is_array()) {
      for (const auto& x : v) f.values.push_back(scalar_from_json(x));
    } else {
      f.values.push_back(scalar_from_json(v));
    }
  };
  if (auto op = get_string(j, {"op", "operator"})) {
    auto parsed = parse_filter_op(*op);
    if (!parsed) {
      sink.error(join_path(path, "op"), "enum", "unknown filter op \"" + *op + "\"");
      return std::nullopt;
    }
    f.op = *parsed;
    if (const auto* v = find_key(j, {"values", "value", "n"})) read_values(*v);
  } else if (const auto* v = find_key(j, {"equal"})) {
    f.op = FilterOp::eq;
    read_values(*v);
  } else if (const auto* v = find_key(j, {"oneOf"})) {
    f.op = FilterOp::in;
    read_values(*v);
  } else if (const auto* v = find_key(j, {"range"})) {
    f.op = FilterOp::range;
    read_values(*v);
  } else if (auto valid = j.find("valid"); valid != j.end() && valid->is_boolean()) {
    f.op = FilterOp::not_null;
  } else if (const auto* v = find_key(j, {"values", "value"})) {
    read_values(*v);
    f.op = f.values.size() == 1 ? FilterOp::eq : FilterOp::in;
  } else {
    sink.error(path, "required", "filter on \"" + f.field + "\" has no op or values");
    return std::nullopt;
  }
  if (auto measure = get_string(j, {"measure", "by"})) f.measure = *measure;
  return f;
}

void parse_filter_list(const json& j, IssueSink& sink, const std::string& path,
                       std::vector<FilterClause>& out) {
  if (j.is_object()) {
    if (auto f = parse_filter(j, sink, path)) out.push_back(*f);
    return;
  }
  if (!j.is_array()) {
    sink.error(path, "type", "filters must be a list");
    return;
  }
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (auto f = parse_filter(j[i], sink, path + idx(i))) out.push_back(*f);
  }
}

std::optional<SortClause> parse_sort_object(const json& j, IssueSink& sink,
                                             const std::string& path) {
  SortClause s;
  if (j.is_string()) {
    s.field = j.get<std::string>();
    return s;
  }
  if (!j.is_object()) {
    sink.error(path, "type", "sort must be a field name or object");
    return std::nullopt;
  }
  auto field = get_string(j, {"field"});
  if (!field || field->empty()) {
    sink.error(path, "required", "sort has no field");
    return std::nullopt;
  }
  s.field = *field;
  if (auto dir = get_string(j, {"order", "direction"})) {
    s.direction = parse_sort_direction(*dir);
    if (!s.direction) {
      sink.error(join_path(path, "order"), "enum", "unknown sort order \"" + *dir + "\"");
    }
  }
  return s;
}

std::optional<SortClause> resolve_channel_sort(const PendingSort& p, const VizSpec& spec,
                                               IssueSink& sink) {
  const auto* own = spec.binding(p.channel);
  if (p.value.is_string()) {
    std::string v = p.value.get<std::string>();
    auto dir = parse_sort_direction(v);
    if (dir) {
      if (!own || own->field.empty()) return std::nullopt;
      return SortClause{own->field, dir};
    }
    bool desc = !v.empty() && v.front() == '-';
    auto ch = parse_channel(desc ? v.substr(1) : v);
    if (ch) {
      const auto* target = spec.binding(*ch);
      if (!target) {
        sink.warning(p.path, "resolve", "sort refers to unbound channel " + v);
        return std::nullopt;
      }
      return SortClause{target->field, desc ? SortDirection::desc : SortDirection::asc};
    }
    sink.warning(p.path, "resolve", "unrecognized channel sort \"" + v + "\"");
    return std::nullopt;
  }
  if (p.value.is_object()) {
    if (p.value.contains("field")) return parse_sort_object(p.value, sink, p.path);
    if (auto enc = get_string(p.value, {"encoding"})) {
      auto ch = parse_channel(*enc);
      const auto* target = ch ? spec.binding(*ch) : nullptr;
      if (!target) return std::nullopt;
      SortClause s{target->field, std::nullopt};
      if (auto dir = get_string(p.value, {"order"})) s.direction = parse_sort_direction(*dir);
      return s;
    }
    if (auto dir = get_string(p.value, {"order"}); dir && own) {
      return SortClause{own->field, parse_sort_direction(*dir)};
    }
  }
  return std::nullopt;
}

void parse_interactions(const json& j, IssueSink& sink, const std::string& path,
                        std::set<Interaction>& out) {
  if (!j.is_array()) {
    sink.error(path, "type", "interactions must be a list");
    return;
  }
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (!j[i].is_string()) {
      sink.error(path + idx(i), "type", "interaction must be a string");
      continue;
    }
    auto name = j[i].get<std::string>();
    if (auto it = parse_interaction(name)) {
      out.insert(*it);
    } else {
      sink.warning(path + idx(i), "enum", "unknown interaction \"" + name + "\" ignored");
    }
  }
}

void parse_params(const json& j, std::set<Interaction>& out) {
  if (!j.is_array()) return;
  for (const auto& p : j) {
    if (!p.is_object()) continue;
    if (auto bind = p.find("bind"); bind != p.end() && bind->is_string() && *bind == "scales") {
      out.insert(Interaction::zoom);
      out.insert(Interaction::pan);
    } else if (p.contains("select")) {
      out.insert(Interaction::selection);
    }
  }
}

}  // namespace

VizSpec parse_viz_spec(const json& j, std::vector<Violation>& issues, const std::string& path) {
  IssueSink sink(issues, "");
  VizSpec spec;
  if (!j.is_object()) {
    sink.error(path, "type", "visualization spec must be an object");
    return spec;
  }
  if (const auto* mark = find_key(j, {"mark"})) {
    std::optional<std::string> name;
    if (mark->is_string()) {
      name = mark->get<std::string>();
    } else if (mark->is_object()) {
      name = get_string(*mark, {"type"});
    }
    if (!name || text::trim(*name).empty()) {
      sink.error(join_path(path, "mark"), "type", "mark must be a mark name");
    } else {
      spec.mark = normalize_mark(*name);
    }
  } else {
    sink.error(join_path(path, "mark"), "required", "spec has no mark");
  }

  std::vector<PendingSort> pending;
  if (const auto* enc = find_key(j, {"encoding"})) {
    if (!enc->is_object()) {
      sink.error(join_path(path, "encoding"), "type", "encoding must be an object");
    } else {
      for (const auto& [key, value] : enc->items()) {
        auto cpath = join_path(join_path(path, "encoding"), key);
        if (key == "tooltip") {
          if (value.is_array()) {
            for (std::size_t i = 0; i < value.size(); ++i) {
              if (auto t = parse_tooltip_entry(value[i], sink, cpath + idx(i))) {
                spec.tooltip.push_back(*t);
              }
            }
          } else if (!value.is_null()) {
            if (auto t = parse_tooltip_entry(value, sink, cpath)) spec.tooltip.push_back(*t);
          }
          continue;
        }
        auto channel = parse_channel(key);
        if (!channel) {
          sink.warning(cpath, "enum", "unsupported channel \"" + key + "\" ignored");
          continue;
        }
        if (value.is_null()) continue;
        if (auto b = parse_binding(value, *channel, sink, cpath, pending)) {
          spec.encoding[*channel] = *b;
        }
      }
    }
  }

  if (const auto* tt = find_key(j, {"tooltip", "tooltipFields"})) {
    auto tpath = join_path(path, "tooltip");
    if (!tt->is_array()) {
      sink.error(tpath, "type", "tooltip must be a list");
    } else {
      for (std::size_t i = 0; i < tt->size(); ++i) {
        if (auto t = parse_tooltip_entry((*tt)[i], sink, tpath + idx(i))) {
          spec.tooltip.push_back(*t);
        }
      }
    }
  }

  if (const auto* filters = find_key(j, {"filters"})) {
    parse_filter_list(*filters, sink, join_path(path, "filters"), spec.filters);
  }
  if (const auto* transform = find_key(j, {"transform"})) {
    auto tpath = join_path(path, "transform");
    if (transform->is_object()) {
      if (const auto* f = find_key(*transform, {"filter"})) {
        parse_filter_list(*f, sink, join_path(tpath, "filter"), spec.filters);
      }
    } else if (transform->is_array()) {
      for (std::size_t i = 0; i < transform->size(); ++i) {
        const auto& step = (*transform)[i];
        if (step.is_object()) {
          if (const auto* f = find_key(step, {"filter"})) {
            parse_filter_list(*f, sink, join_path(tpath + idx(i), "filter"), spec.filters);
          }
        }
      }
    } else {
      sink.error(tpath, "type", "transform must be an object or list");
    }
  }

  if (const auto* sort = find_key(j, {"sort"})) {
    spec.sort = parse_sort_object(*sort, sink, join_path(path, "sort"));
  } else {
    for (const auto& p : pending) {
      if (auto s = resolve_channel_sort(p, spec, sink)) {
        spec.sort = s;
        break;
      }
    }
  }

  if (const auto* inter = find_key(j, {"interactions"})) {
    parse_interactions(*inter, sink, join_path(path, "interactions"), spec.interactions);
  }
  if (const auto* params = find_key(j, {"params", "selection"})) {
    parse_params(*params, spec.interactions);
  }
  return spec;
}

json viz_spec_to_json(const VizSpec& spec) {
  json j;
  j["mark"] = mark_name(spec.mark);
  json enc = json::object();
  for (const auto& [channel, b] : spec.encoding) {
    json c = json::object();
    if (!b.field.empty()) c["field"] = b.field;
    if (b.aggregate) c["aggregate"] = to_string(*b.aggregate);
    if (b.scale || b.zero) {
      json s = json::object();
      if (b.scale) s["type"] = to_string(*b.scale);
      if (b.zero) s["zero"] = *b.zero;
      c["scale"] = s;
    }
    enc[std::string(to_string(channel))] = c;
  }
  j["encoding"] = enc;
  if (!spec.tooltip.empty()) {
    json tt = json::array();
    for (const auto& t : spec.tooltip) {
      json e = json::object();
      e["field"] = t.field;
      if (t.aggregate) e["aggregate"] = to_string(*t.aggregate);
      if (!t.format.empty()) e["format"] = t.format;
      tt.push_back(e);
    }
    j["tooltip"] = tt;
  }
  if (!spec.filters.empty()) {
    json fs_ = json::array();
    for (const auto& f : spec.filters) {
      json e = json::object();
      e["field"] = f.field;
      e["op"] = to_string(f.op);
      json values = json::array();
      for (const auto& v : f.values) values.push_back(scalar_to_json(v));
      e["values"] = values;
      if (f.measure) e["measure"] = *f.measure;
      fs_.push_back(e);
    }
    j["filters"] = fs_;
  }
  if (spec.sort) {
    json s = json::object();
    s["field"] = spec.sort->field;
    if (spec.sort->direction) {
      s["order"] = *spec.sort->direction == SortDirection::asc ? "ascending" : "descending";
    }
    j["sort"] = s;
  }
  if (!spec.interactions.empty()) {
    json arr = json::array();
    for (auto i : spec.interactions) arr.push_back(to_string(i));
    j["interactions"] = arr;
  }
  return j;
}

// ---------------------------------------------------------------------------
// Datasource

namespace {

bool value_is_numeric(const Scalar& v) { return scalar_as_number(v).has_value(); }

bool value_is_temporal(const Scalar& v) {
  if (const auto* s = std::get_if<std::string>(&v)) return parse_temporal(*s).has_value();
  if (const auto* d = std::get_if<double>(&v)) {
    return std::floor(*d) == *d && *d >= 1000 && *d <= 9999;
  }
  return false;
}

bool is_null(const Scalar& v) { return std::holds_alternative<std::monostate>(v); }

DataType infer_type(const std::vector<Scalar>& values) {
  bool any = false;
  bool numeric = true;
  bool temporal = true;
  for (const auto& v : values) {
    if (is_null(v)) continue;
    any = true;
    numeric = numeric && !std::holds_alternative<bool>(v) && value_is_numeric(v);
    temporal = temporal && std::holds_alternative<std::string>(v) && value_is_temporal(v);
  }
  if (!any) return DataType::nominal;
  if (numeric) return DataType::quantitative;
  if (temporal) return DataType::temporal;
  return DataType::nominal;
}

}  // namespace

json datasource_to_json(const Datasource& ds) {
  json j;
  j["title"] = ds.title;
  json fields = json::array();
  for (const auto& f : ds.fields) {
    json e;
    e["name"] = f.name;
    e["aliases"] = f.aliases;
    if (!f.type_inferred) e["dataType"] = to_string(f.data_type);
    json values = json::array();
    for (const auto& v : f.values) values.push_back(scalar_to_json(v));
    e["fieldValues"] = values;
    fields.push_back(e);
  }
  j["fields"] = fields;
  return j;
}

Datasource parse_datasource(const json& j, const std::string& file) {
  std::vector<Violation> issues;
  IssueSink sink(issues, file);
  Datasource ds;
  if (!j.is_object()) {
    sink.error("", "type", "datasource must be an object with \"title\" and \"fields\"");
    throw ValidationError(issues);
  }
  if (auto t = j.find("title"); t != j.end() && t->is_string()) {
    ds.title = t->get<std::string>();
  } else {
    sink.error("title", "required", "datasource must have a string \"title\"");
  }
  auto fields_it = j.find("fields");
  if (fields_it == j.end() || !fields_it->is_array() || fields_it->empty()) {
    sink.error("fields", "non-empty", "datasource must declare at least one field");
    throw ValidationError(issues);
  }
  std::unordered_map<std::string, std::string> seen;
  for (std::size_t i = 0; i < fields_it->size(); ++i) {
    const auto& fj = (*fields_it)[i];
    auto path = "fields" + idx(i);
    if (!fj.is_object()) {
      sink.error(path, "type", "field must be an object");
      continue;
    }
    DataField f;
    if (auto n = fj.find("name"); n != fj.end() && n->is_string() && !text::trim(n->get<std::string>()).empty()) {
      f.name = n->get<std::string>();
    } else {
      sink.error(path + ".name", "required", "field must have a non-empty string \"name\"");
      continue;
    }
    auto key = text::to_lower(text::trim(f.name));
    if (auto prev = seen.find(key); prev != seen.end()) {
      sink.error(path + ".name", "unique",
                 "duplicate field name \"" + f.name + "\" (names are case-insensitive)");
    }
    seen.emplace(key, f.name);
    if (auto a = fj.find("aliases"); a != fj.end() && !a->is_null()) {
      if (!a->is_array()) {
        sink.error(path + ".aliases", "type", "aliases must be a list of strings");
      } else {
        for (std::size_t k = 0; k < a->size(); ++k) {
          if ((*a)[k].is_string()) {
            f.aliases.push_back((*a)[k].get<std::string>());
          } else {
            sink.error(path + ".aliases" + idx(k), "type", "alias must be a string");
          }
        }
      }
    }
    auto vals = fj.find("fieldValues");
    if (vals == fj.end() || !vals->is_array() || vals->empty()) {
      sink.error(path + ".fieldValues", "non-empty",
                 "field \"" + f.name + "\" must have a non-empty \"fieldValues\" list");
    } else {
      for (const auto& v : *vals) {
        if (v.is_array() || v.is_object()) {
          sink.error(path + ".fieldValues", "scalar",
                     "field \"" + f.name + "\" values must be scalars");
          break;
        }
        f.values.push_back(scalar_from_json(v));
      }
    }
    if (auto dt = fj.find("dataType"); dt != fj.end() && !dt->is_null()) {
      auto parsed = dt->is_string() ? parse_data_type(dt->get<std::string>()) : std::nullopt;
      if (!parsed) {
        sink.error(path + ".dataType", "enum",
                   "unknown dataType " + dt->dump() +
                       " for field \"" + f.name +
                       "\"; use one of nominal, ordinal, quantitative, temporal");
      } else {
        f.data_type = *parsed;
      }
    } else {
      f.data_type = infer_type(f.values);
      f.type_inferred = true;
    }
    if (!f.type_inferred) {
      for (std::size_t k = 0; k < f.values.size(); ++k) {
        const auto& v = f.values[k];
        if (is_null(v)) continue;
        if (f.data_type == DataType::quantitative && !value_is_numeric(v)) {
          sink.error(path + ".fieldValues" + idx(k), "quantitative",
                     "value " + scalar_to_string(v) + " of quantitative field \"" + f.name +
                         "\" is not a number");
          break;
        }
        if (f.data_type == DataType::temporal && !value_is_temporal(v)) {
          sink.error(path + ".fieldValues" + idx(k), "temporal",
                     "value " + scalar_to_string(v) + " of temporal field \"" + f.name +
                         "\" is not an ISO-8601 date, YYYY-MM or YYYY");
          break;
        }
      }
    }
    ds.fields.push_back(std::move(f));
  }
  std::size_t longest = 0;
  for (const auto& f : ds.fields) longest = std::max(longest, f.values.size());
  for (std::size_t i = 0; i < ds.fields.size(); ++i) {
    const auto& f = ds.fields[i];
    if (!f.values.empty() && f.values.size() != longest) {
      sink.error("fields" + idx(i) + ".fieldValues", "equal-length",
                 "column \"" + f.name + "\" has " + std::to_string(f.values.size()) +
                     " values but other columns have " + std::to_string(longest));
    }
  }
  bool has_error = std::any_of(issues.begin(), issues.end(),
                               [](const Violation& v) { return v.severity == Severity::error; });
  if (has_error) throw ValidationError(issues);
  return ds;
}

Datasource load_datasource(const fs::path& path) {
  return parse_datasource(load_document(path), path.string());
}

// ---------------------------------------------------------------------------
// Test suites

namespace {

json spec_list_to_json(const std::vector<std::string>& v) { return json(v); }

template <typename E>
json enum_set_to_json(const std::set<E>& s) {
  json arr = json::array();
  for (auto e : s) arr.push_back(to_string(e));
  return arr;
}

void collect_refs(const VizSpec& spec, std::vector<std::pair<std::string, std::string>>& refs) {
  for (const auto& [c, b] : spec.encoding) {
    if (!b.field.empty()) refs.emplace_back("encoding." + std::string(to_string(c)) + ".field", b.field);
  }
  for (std::size_t i = 0; i < spec.tooltip.size(); ++i) {
    if (!spec.tooltip[i].field.empty()) {
      refs.emplace_back("tooltip" + idx(i) + ".field", spec.tooltip[i].field);
    }
  }
  for (std::size_t i = 0; i < spec.filters.size(); ++i) {
    refs.emplace_back("filters" + idx(i) + ".field", spec.filters[i].field);
    if (spec.filters[i].measure) {
      refs.emplace_back("filters" + idx(i) + ".measure", *spec.filters[i].measure);
    }
  }
  if (spec.sort) refs.emplace_back("sort.field", spec.sort->field);
}

std::vector<std::string> string_list(const json& j, IssueSink& sink, const std::string& path) {
  std::vector<std::string> out;
  if (j.is_null()) return out;
  if (!j.is_array()) {
    sink.error(path, "type", "must be a list of strings");
    return out;
  }
  for (std::size_t i = 0; i < j.size(); ++i) {
    if (j[i].is_string()) {
      out.push_back(j[i].get<std::string>());
    } else {
      sink.error(path + idx(i), "type", "must be a string");
    }
  }
  return out;
}

template <typename E, typename Parse>
std::set<E> label_set(const json& j, IssueSink& sink, const std::string& path, Parse parse,
                      const char* vocabulary) {
  std::set<E> out;
  if (j.is_null()) return out;
  json arr = j.is_array() ? j : json::array({j});
  for (std::size_t i = 0; i < arr.size(); ++i) {
    if (!arr[i].is_string()) {
      sink.error(path + idx(i), "type", "label must be a string");
      continue;
    }
    auto v = parse(arr[i].get<std::string>());
    if (!v) {
      sink.error(path + idx(i), "vocabulary",
                 "unknown label \"" + arr[i].get<std::string>() + "\"; expected one of " +
                     vocabulary);
    } else {
      out.insert(*v);
    }
  }
  return out;
}

}  // namespace

std::vector<std::string> unresolved_fields(const VizSpec& spec, const Datasource& ds) {
  std::vector<std::pair<std::string, std::string>> refs;
  collect_refs(spec, refs);
  std::vector<std::string> out;
  for (const auto& [path, field] : refs) {
    if (!ds.find(field) && std::find(out.begin(), out.end(), field) == out.end()) {
      out.push_back(field);
    }
  }
  return out;
}

json test_case_to_json(const TestCase& tc) {
  json j;
  j["conversationId"] = tc.conversation_id;
  if (!tc.datasource_ref.empty()) j["datasourceRef"] = tc.datasource_ref;
  json turns = json::array();
  for (const auto& t : tc.turns) {
    json tj;
    tj["utterance"] = t.utterance;
    tj["variations"] = spec_list_to_json(t.variations);
    json labels;
    labels["chartType"] = t.labels.chart_type;
    labels["ambiguity"] = enum_set_to_json(t.labels.ambiguity);
    labels["contextHandling"] = enum_set_to_json(t.labels.context_handling);
    labels["inferencing"] = spec_list_to_json(t.labels.inferencing);
    tj["labels"] = labels;
    json expected = json::array();
    for (const auto& e : t.expected) {
      expected.push_back(json{{"vizSpec", viz_spec_to_json(e.viz_spec)},
                              {"nlExplanation", e.nl_explanation}});
    }
    tj["expected"] = expected;
    turns.push_back(tj);
  }
  j["turns"] = turns;
  return j;
}

json test_suite_to_json(const std::vector<TestCase>& suite) {
  json arr = json::array();
  for (const auto& tc : suite) arr.push_back(test_case_to_json(tc));
  return arr;
}

namespace {

std::vector<TestCase> parse_suite_impl(const json& j, const std::vector<Datasource>& sources,
                                       std::vector<Violation>* warnings, const std::string& file) {
  std::vector<Violation> issues;
  IssueSink sink(issues, file);
  const json* list = &j;
  if (j.is_object()) {
    list = find_key(j, {"testCases", "conversations"});
  }
  if (!list || !list->is_array()) {
    sink.error("", "type", "test suite must be a list of conversations");
    throw ValidationError(issues);
  }
  std::vector<TestCase> suite;
  std::unordered_set<std::string> ids;
  for (std::size_t ci = 0; ci < list->size(); ++ci) {
    const auto& cj = (*list)[ci];
    auto cpath = idx(ci);
    if (!cj.is_object()) {
      sink.error(cpath, "type", "conversation must be an object");
      continue;
    }
    TestCase tc;
    auto id_it = cj.find("conversationId");
    if (id_it != cj.end() && id_it->is_string() && !id_it->get<std::string>().empty()) {
      tc.conversation_id = id_it->get<std::string>();
    } else if (id_it != cj.end() && id_it->is_number_integer()) {
      tc.conversation_id = std::to_string(id_it->get<long long>());
    } else {
      sink.error(cpath + ".conversationId", "required", "conversation must have a conversationId");
    }
    if (!tc.conversation_id.empty() && !ids.insert(tc.conversation_id).second) {
      sink.error(cpath + ".conversationId", "unique",
                 "duplicate conversationId \"" + tc.conversation_id + "\"");
    }
    if (auto r = cj.find("datasourceRef"); r != cj.end() && !r->is_null()) {
      if (r->is_string()) {
        tc.datasource_ref = r->get<std::string>();
      } else {
        sink.error(cpath + ".datasourceRef", "type", "datasourceRef must be a string");
      }
    }
    const Datasource* ds = resolve_datasource(sources, tc.datasource_ref);
    if (!ds) {
      sink.error(cpath + ".datasourceRef", "resolve",
                 "datasourceRef \"" + tc.datasource_ref + "\" matches no loaded datasource");
    }
    auto turns_it = cj.find("turns");
    if (turns_it == cj.end() || !turns_it->is_array() || turns_it->empty()) {
      sink.error(cpath + ".turns", "non-empty", "conversation must have at least one turn");
      continue;
    }
    for (std::size_t ti = 0; ti < turns_it->size(); ++ti) {
      const auto& tj = (*turns_it)[ti];
      auto tpath = cpath + ".turns" + idx(ti);
      if (!tj.is_object()) {
        sink.error(tpath, "type", "turn must be an object");
        continue;
      }
      if (auto ix = tj.find("turnIndex"); ix != tj.end()) {
        if (!ix->is_number_integer() || ix->get<long long>() != static_cast<long long>(ti + 1)) {
          sink.error(tpath + ".turnIndex", "contiguous",
                     "turn indices must run 1, 2, 3... in order; expected " +
                         std::to_string(ti + 1));
        }
      }
      ConversationTurn turn;
      if (auto u = tj.find("utterance"); u != tj.end() && u->is_string() &&
                                         !text::trim(u->get<std::string>()).empty()) {
        turn.utterance = u->get<std::string>();
      } else {
        sink.error(tpath + ".utterance", "required", "turn must have a non-empty utterance");
      }
      if (auto v = tj.find("variations"); v != tj.end()) {
        turn.variations = string_list(*v, sink, tpath + ".variations");
      }
      if (auto l = tj.find("labels"); l != tj.end() && !l->is_null()) {
        auto lpath = tpath + ".labels";
        if (!l->is_object()) {
          sink.error(lpath, "type", "labels must be an object");
        } else {
          if (auto ct = l->find("chartType"); ct != l->end() && !ct->is_null()) {
            if (ct->is_string()) {
              turn.labels.chart_type = ct->get<std::string>();
            } else {
              sink.error(lpath + ".chartType", "type", "chartType must be a string");
            }
          }
          if (auto a = l->find("ambiguity"); a != l->end()) {
            turn.labels.ambiguity = label_set<Ambiguity>(*a, sink, lpath + ".ambiguity",
                                                         parse_ambiguity,
                                                         "syntactic, semantic, pragmatic");
          }
          if (auto c = l->find("contextHandling"); c != l->end()) {
            turn.labels.context_handling = label_set<ContextHandling>(
                *c, sink, lpath + ".contextHandling", parse_context_handling,
                "slot-filling, reference-resolution, filter-carryover, none");
          }
          if (auto inf = l->find("inferencing"); inf != l->end()) {
            turn.labels.inferencing = string_list(*inf, sink, lpath + ".inferencing");
          }
        }
      }
      auto exp_it = tj.find("expected");
      if (exp_it == tj.end() || !exp_it->is_array() || exp_it->empty()) {
        sink.error(tpath + ".expected", "required",
                   "turn has no expected response; add at least one {vizSpec, nlExplanation}");
      } else {
        for (std::size_t ei = 0; ei < exp_it->size(); ++ei) {
          const auto& ej = (*exp_it)[ei];
          auto epath = tpath + ".expected" + idx(ei);
          if (!ej.is_object()) {
            sink.error(epath, "type", "expected response must be an object");
            continue;
          }
          ExpectedResponse er;
          if (auto vs = ej.find("vizSpec"); vs != ej.end()) {
            std::vector<Violation> spec_issues;
            er.viz_spec = parse_viz_spec(*vs, spec_issues, epath + ".vizSpec");
            for (auto& v : spec_issues) {
              v.file = file;
              issues.push_back(v);
            }
          } else {
            sink.error(epath + ".vizSpec", "required", "expected response must have a vizSpec");
          }
          if (auto nl = ej.find("nlExplanation"); nl != ej.end() && nl->is_string() &&
                                                 !text::trim(nl->get<std::string>()).empty()) {
            er.nl_explanation = nl->get<std::string>();
          } else {
            sink.error(epath + ".nlExplanation", "required",
                       "expected response must have a non-empty nlExplanation");
          }
          if (ds) {
            std::vector<std::pair<std::string, std::string>> refs;
            collect_refs(er.viz_spec, refs);
            for (const auto& [rpath, field] : refs) {
              if (!ds->find(field)) {
                sink.warning(epath + ".vizSpec." + rpath, "resolve", "unresolved field: " + field);
              }
            }
          }
          turn.expected.push_back(std::move(er));
        }
      }
      tc.turns.push_back(std::move(turn));
    }
    suite.push_back(std::move(tc));
  }
  std::vector<Violation> errors;
  for (auto& v : issues) {
    if (v.severity == Severity::error) {
      errors.push_back(v);
    } else if (warnings) {
      warnings->push_back(v);
    }
  }
  if (!errors.empty()) throw ValidationError(errors);
  return suite;
}

}  // namespace

const Datasource* resolve_datasource(const std::vector<Datasource>& sources, std::string_view ref) {
  if (sources.size() == 1) return &sources.front();
  auto key = text::normalize_key(ref);
  for (const auto& ds : sources) {
    if (text::normalize_key(ds.title) == key) return &ds;
  }
  return nullptr;
}

std::vector<TestCase> parse_test_suite(const json& j, const Datasource& ds,
                                       std::vector<Violation>* warnings, const std::string& file) {
  return parse_suite_impl(j, {ds}, warnings, file);
}

std::vector<TestCase> parse_test_suite(const json& j, const std::vector<Datasource>& sources,
                                       std::vector<Violation>* warnings, const std::string& file) {
  return parse_suite_impl(j, sources, warnings, file);
}

std::vector<TestCase> load_test_suite(const fs::path& path, const Datasource& ds,
                                      std::vector<Violation>* warnings) {
  return parse_suite_impl(load_document(path), {ds}, warnings, path.string());
}

std::vector<TestCase> load_test_suite(const fs::path& path, const std::vector<Datasource>& sources,
                                      std::vector<Violation>* warnings) {
  return parse_suite_impl(load_document(path), sources, warnings, path.string());
}

std::vector<TestCase> select_test_cases(const std::vector<TestCase>& suite,
                                        std::string_view selection) {
  if (text::trim(selection).empty() || text::equals_ci(text::trim(selection), "all")) {
    return suite;
  }
  std::set<std::string> wanted;
  std::vector<std::string> unknown;
  auto has_id = [&](const std::string& id) {
    return std::any_of(suite.begin(), suite.end(),
                       [&](const TestCase& tc) { return tc.conversation_id == id; });
  };
  static const std::regex range_re(R"(^(\d+)\s*-\s*(\d+)$)");
  for (const auto& raw : text::split(selection, ',')) {
    auto item = text::trim(raw);
    if (item.empty()) continue;
    std::smatch m;
    if (!has_id(item) && std::regex_match(item, m, range_re)) {
      long lo = std::stol(m[1].str());
      long hi = std::stol(m[2].str());
      if (lo > hi) std::swap(lo, hi);
      for (long i = lo; i <= hi; ++i) {
        auto id = std::to_string(i);
        if (has_id(id)) {
          wanted.insert(id);
        } else {
          unknown.push_back(id);
        }
      }
      continue;
    }
    if (has_id(item)) {
      wanted.insert(item);
    } else {
      unknown.push_back(item);
    }
  }
  if (!unknown.empty()) {
    std::vector<Violation> v;
    for (const auto& id : unknown) {
      v.push_back(Violation{Severity::error, "", "testCaseSelection", "resolve",
                            "unknown test case id: " + id});
    }
    throw ValidationError(v);
  }
  std::vector<TestCase> out;
  for (const auto& tc : suite) {
    if (wanted.count(tc.conversation_id)) out.push_back(tc);
  }
  return out;
}

// ---------------------------------------------------------------------------
// results plumbing

json model_response_to_json(const ModelResponse& r) {
  json j;
  j["vizSpec"] = r.viz_spec ? viz_spec_to_json(*r.viz_spec) : json(nullptr);
  j["nlText"] = r.nl_text;
  j["rawOutput"] = r.raw_output;
  j["latencyMs"] = r.latency_ms;
  if (r.token_usage) {
    j["tokenUsage"] = {{"promptTokens", r.token_usage->prompt_tokens},
                       {"completionTokens", r.token_usage->completion_tokens}};
  } else {
    j["tokenUsage"] = nullptr;
  }
  j["parseStatus"] = to_string(r.parse_status);
  return j;
}

ModelResponse model_response_from_json(const json& j) {
  ModelResponse r;
  if (auto vs = j.find("vizSpec"); vs != j.end() && !vs->is_null()) {
    std::vector<Violation> issues;
    r.viz_spec = parse_viz_spec(*vs, issues);
  }
  r.nl_text = j.value("nlText", "");
  r.raw_output = j.value("rawOutput", "");
  r.latency_ms = j.value("latencyMs", 0.0);
  if (auto tu = j.find("tokenUsage"); tu != j.end() && tu->is_object()) {
    r.token_usage = TokenUsage{tu->value("promptTokens", std::int64_t{0}),
                               tu->value("completionTokens", std::int64_t{0})};
  }
  r.parse_status = parse_parse_status(j.value("parseStatus", "failed")).value_or(ParseStatus::failed);
  return r;
}

json metric_score_to_json(const MetricScore& s) {
  json j;
  j["metricId"] = s.metric_id;
  j["status"] = to_string(s.status);
  j["value"] = s.value;
  j["rawJudgeScore"] = s.raw_judge_score ? json(*s.raw_judge_score) : json(nullptr);
  j["explanation"] = s.explanation;
  j["expectedFragment"] = s.expected_fragment ? json(*s.expected_fragment) : json(nullptr);
  j["actualFragment"] = s.actual_fragment ? json(*s.actual_fragment) : json(nullptr);
  j["judgeRationale"] = s.judge_rationale ? json(*s.judge_rationale) : json(nullptr);
  return j;
}

MetricScore metric_score_from_json(const json& j) {
  MetricScore s;
  s.metric_id = j.value("metricId", "");
  s.status = parse_metric_status(j.value("status", "scored")).value_or(MetricStatus::scored);
  s.value = j.value("value", 0.0);
  auto opt_num = [&](const char* key) -> std::optional<double> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<double>();
  };
  auto opt_str = [&](const char* key) -> std::optional<std::string> {
    auto it = j.find(key);
    if (it == j.end() || it->is_null()) return std::nullopt;
    return it->get<std::string>();
  };
  s.raw_judge_score = opt_num("rawJudgeScore");
  s.explanation = j.value("explanation", "");
  s.expected_fragment = opt_str("expectedFragment");
  s.actual_fragment = opt_str("actualFragment");
  s.judge_rationale = opt_str("judgeRationale");
  return s;
}

json model_ref_to_json(const ModelRef& m) {
  return json{{"providerId", m.provider_id},
              {"modelId", m.model_id},
              {"family", m.family},
              {"displayName", m.display_name}};
}

ModelRef model_ref_from_json(const json& j) {
  ModelRef m;
  if (j.is_string()) {
    auto s = j.get<std::string>();
    auto slash = s.find('/');
    if (slash == std::string::npos) {
      m.model_id = s;
    } else {
      m.provider_id = s.substr(0, slash);
      m.model_id = s.substr(slash + 1);
    }
    return m;
  }
  m.provider_id = j.value("providerId", "");
  m.model_id = j.value("modelId", "");
  m.family = j.value("family", "");
  m.display_name = j.value("displayName", "");
  return m;
}

std::vector<std::string> missing_placeholders(std::string_view tmpl) {
  std::vector<std::string> missing;
  for (auto name : kRequiredPlaceholders) {
    std::string token = "{" + std::string(name) + "}";
    if (tmpl.find(token) == std::string_view::npos) missing.emplace_back(name);
  }
  return missing;
}

json experiment_config_to_json(const ExperimentConfig& c) {
  json j;
  json models = json::array();
  for (const auto& m : c.models) models.push_back(model_ref_to_json(m));
  j["models"] = models;
  j["systemPrompts"] = c.system_prompts;
  j["testCaseSelection"] = c.test_case_selection;
  j["metrics"] = json(std::vector<std::string>(c.metric_selection.begin(), c.metric_selection.end()));
  j["runs"] = c.runs;
  j["judgeModel"] = c.judge_model ? model_ref_to_json(*c.judge_model) : json(nullptr);
  j["strict"] = c.strict;
  return j;
}

ExperimentConfig experiment_config_from_json(const json& j) {
  std::vector<Violation> issues;
  IssueSink sink(issues, "");
  ExperimentConfig c;
  if (!j.is_object()) {
    sink.error("", "type", "experiment config must be an object");
    throw ValidationError(issues);
  }
  if (auto m = j.find("models"); m != j.end() && m->is_array()) {
    for (std::size_t i = 0; i < m->size(); ++i) {
      const auto& mj = (*m)[i];
      if (!mj.is_string() && !mj.is_object()) {
        sink.error("models" + idx(i), "type", "model must be \"provider/model\" or an object");
        continue;
      }
      auto ref = model_ref_from_json(mj);
      if (ref.model_id.empty()) {
        sink.error("models" + idx(i), "required", "model reference has no modelId");
        continue;
      }
      c.models.push_back(ref);
    }
  }
  if (c.models.empty() && issues.empty()) {
    sink.error("models", "non-empty", "select at least one model");
  }
  if (auto p = j.find("systemPrompts"); p != j.end() && p->is_array()) {
    for (std::size_t i = 0; i < p->size(); ++i) {
      if (!(*p)[i].is_string()) {
        sink.error("systemPrompts" + idx(i), "type", "prompt must be a string");
        continue;
      }
      auto tmpl = (*p)[i].get<std::string>();
      for (const auto& name : missing_placeholders(tmpl)) {
        sink.error("systemPrompts" + idx(i), "placeholder",
                   "template missing required placeholder: " + name);
      }
      c.system_prompts.push_back(tmpl);
    }
  }
  if (c.system_prompts.empty()) {
    sink.error("systemPrompts", "non-empty", "provide at least one system prompt");
  }
  if (auto s = j.find("testCaseSelection"); s != j.end() && !s->is_null()) {
    if (s->is_string()) {
      c.test_case_selection = s->get<std::string>();
    } else {
      sink.error("testCaseSelection", "type", "testCaseSelection must be a string such as \"1-3,7\"");
    }
  }
  if (auto m = j.find("metrics"); m != j.end() && !m->is_null()) {
    if (!m->is_array()) {
      sink.error("metrics", "type", "metrics must be a list of metric ids");
    } else {
      for (std::size_t i = 0; i < m->size(); ++i) {
        auto id = (*m)[i].is_string() ? (*m)[i].get<std::string>() : std::string();
        const auto& all = all_metric_ids();
        if (std::find(all.begin(), all.end(), id) == all.end()) {
          sink.error("metrics" + idx(i), "enum", "unknown metric id \"" + id + "\"");
        } else {
          c.metric_selection.insert(id);
        }
      }
    }
  }
  if (auto r = j.find("runs"); r != j.end() && !r->is_null()) {
    if (!r->is_number_integer()) {
      sink.error("runs", "type", "runs must be an integer between 1 and 5");
    } else {
      c.runs = r->get<int>();
      if (c.runs < 1 || c.runs > 5) {
        sink.error("runs", "range", "runs must be between 1 and 5 (got " + std::to_string(c.runs) + ")");
      }
    }
  }
  if (auto jm = j.find("judgeModel"); jm != j.end() && !jm->is_null()) {
    c.judge_model = model_ref_from_json(*jm);
  }
  c.strict = j.value("strict", false);
  if (!issues.empty()) throw ValidationError(issues);
  return c;
}

}  // namespace cvabench
