#include "hierdg/records.hpp"

#include <algorithm>
#include <cmath>
#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "hierdg/rng.hpp"

namespace hierdg {

using nlohmann::json;

TaskKind parse_task_kind(const std::string& name) {
  if (name == "mortality") return TaskKind::mortality;
  if (name == "readmission") return TaskKind::readmission;
  if (name == "diagnosis") return TaskKind::diagnosis;
  if (name == "drug") return TaskKind::drug;
  throw RecordError("unknown task kind: " + name);
}

std::string task_kind_name(TaskKind kind) {
  switch (kind) {
    case TaskKind::mortality: return "mortality";
    case TaskKind::readmission: return "readmission";
    case TaskKind::diagnosis: return "diagnosis";
    case TaskKind::drug: return "drug";
  }
  throw RecordError("bad task kind value");
}

void TaskSpec::validate() const {
  if (binary()) {
    if (d != 1) throw RecordError(task_kind_name(kind) + " task requires d=1");
  } else {
    if (d < 2) throw RecordError(task_kind_name(kind) + " task requires d>1");
  }
  if (kind == TaskKind::readmission && readmission_window_days <= 0)
    throw RecordError("readmission window must be positive");
}

namespace {

PatientRecord parse_record(const json& j, const TaskSpec& task, int lineno) {
  auto fail = [&](const std::string& msg, const std::string& id) {
    std::ostringstream ss;
    ss << "line " << lineno;
    if (!id.empty()) ss << " (patient " << id << ")";
    ss << ": " << msg;
    throw RecordError(ss.str());
  };

  PatientRecord p;
  if (!j.is_object()) fail("record is not an object", "");
  if (!j.contains("id") || !j["id"].is_string()) fail("missing string field 'id'", "");
  p.id = j["id"].get<std::string>();
  if (!j.contains("visits") || !j["visits"].is_array())
    fail("missing array field 'visits'", p.id);
  if (j["visits"].size() < 2) fail("patient has fewer than 2 visits", p.id);

  int64_t prev_day = std::numeric_limits<int64_t>::min();
  for (const auto& jv : j["visits"]) {
    Visit v;
    if (!jv.contains("day") || !jv["day"].is_number_integer())
      fail("visit missing integer 'day'", p.id);
    v.day = jv["day"].get<int64_t>();
    if (v.day < prev_day) fail("visit days not sorted", p.id);
    prev_day = v.day;
    if (!jv.contains("codes") || !jv["codes"].is_array() ||
        jv["codes"].size() != kFeatureKeys)
      fail("visit 'codes' must list one code array per feature key", p.id);
    bool any = false;
    for (std::size_t k = 0; k < kFeatureKeys; ++k) {
      if (!jv["codes"][k].is_array()) fail("per-key codes must be an array", p.id);
      for (const auto& jc : jv["codes"][k]) {
        if (!jc.is_string()) fail("code must be a string", p.id);
        v.codes[k].push_back(jc.get<std::string>());
      }
      std::sort(v.codes[k].begin(), v.codes[k].end());
      v.codes[k].erase(std::unique(v.codes[k].begin(), v.codes[k].end()), v.codes[k].end());
      any = any || !v.codes[k].empty();
    }
    if (!any) fail("visit has no codes", p.id);
    p.visits.push_back(std::move(v));
  }

  if (!j.contains("label") || !j["label"].is_array())
    fail("missing array field 'label'", p.id);
  for (const auto& jl : j["label"]) {
    if (!jl.is_number_unsigned()) fail("label entries must be non-negative indices", p.id);
    std::size_t idx = jl.get<std::size_t>();
    if (idx >= task.d)
      fail("label index " + std::to_string(idx) + " out of range for d=" +
               std::to_string(task.d),
           p.id);
    p.label.push_back(idx);
  }
  std::sort(p.label.begin(), p.label.end());
  if (std::adjacent_find(p.label.begin(), p.label.end()) != p.label.end())
    fail("duplicate label index", p.id);
  return p;
}

}  // namespace

std::vector<PatientRecord> load_dataset(std::istream& is, const TaskSpec& task) {
  task.validate();
  std::vector<PatientRecord> out;
  std::string line;
  int lineno = 0;
  while (std::getline(is, line)) {
    ++lineno;
    if (line.empty()) continue;
    json j;
    try {
      j = json::parse(line);
    } catch (const json::parse_error& e) {
      throw RecordError("line " + std::to_string(lineno) + ": bad record syntax: " + e.what());
    }
    out.push_back(parse_record(j, task, lineno));
  }
  return out;
}

std::vector<PatientRecord> load_dataset(const std::filesystem::path& path, const TaskSpec& task) {
  std::ifstream is(path);
  if (!is) throw RecordError("cannot open dataset: " + path.string());
  return load_dataset(is, task);
}

void save_dataset(std::ostream& os, const std::vector<PatientRecord>& data) {
  for (const auto& p : data) {
    json j;
    j["id"] = p.id;
    j["visits"] = json::array();
    for (const auto& v : p.visits) {
      json jv;
      jv["day"] = v.day;
      jv["codes"] = v.codes;
      j["visits"].push_back(std::move(jv));
    }
    j["label"] = p.label;
    os << j.dump() << '\n';
  }
}

void save_dataset(const std::filesystem::path& path, const std::vector<PatientRecord>& data) {
  std::ofstream os(path);
  if (!os) throw RecordError("cannot open for write: " + path.string());
  save_dataset(os, data);
}

std::vector<uint8_t> aggregate_history(const PatientRecord& p, std::size_t upto,
                                       const Hierarchy& vocab) {
  if (upto < 1 || upto > p.visits.size())
    throw RecordError("history index " + std::to_string(upto) + " out of range for patient " +
                      p.id);
  std::vector<uint8_t> bits(vocab.leaf_count(), 0);
  for (std::size_t t = 0; t < upto; ++t)
    for (const auto& code : p.visits[t].codes[0])
      bits[vocab.leaf_index(vocab.leaf_for_code(code))] = 1;
  return bits;
}

SplitResult temporal_split(const std::vector<PatientRecord>& data, int64_t cutoff,
                           const SplitRatios& ratios, const SplitOptions& opts) {
  double sum = ratios.train + ratios.val + ratios.test;
  if (std::abs(sum - 1.0) > 1e-9)
    throw RecordError("split ratios must sum to 1, got " + std::to_string(sum));

  SplitResult r;
  std::vector<std::size_t> source;
  for (std::size_t i = 0; i < data.size(); ++i) {
    if (data[i].visits.back().day > cutoff)
      r.test.push_back(data[i]);
    else
      source.push_back(i);
  }

  CounterRng rng(opts.seed, {hash_name("temporal_split")});
  rng.shuffle(source);
  const double val_frac = ratios.val / (ratios.train + ratios.val);
  const std::size_t n_val =
      static_cast<std::size_t>(std::llround(static_cast<double>(source.size()) * val_frac));
  for (std::size_t i = 0; i < source.size(); ++i) {
    if (i < n_val)
      r.val.push_back(data[source[i]]);
    else
      r.train.push_back(data[source[i]]);
  }

  if (opts.fail_on_empty && (r.train.empty() || r.val.empty() || r.test.empty()))
    throw RecordError("temporal split produced an empty subset");
  return r;
}

}  // namespace hierdg
