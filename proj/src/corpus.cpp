#include "cliq/corpus.hpp"

#include <fstream>
#include <sstream>

#include <nlohmann/json.hpp>

#include "cliq/error.hpp"

namespace cliq {

using nlohmann::json;
using nlohmann::ordered_json;

std::string_view to_string(QuerySource source) {
  return source == QuerySource::kOriginal ? "original" : "generated";
}

std::string trim(std::string_view s) {
  const auto is_space = [](char c) {
    return c == ' ' || c == '\t' || c == '\n' || c == '\r' || c == '\f' || c == '\v';
  };
  std::size_t b = 0, e = s.size();
  while (b < e && is_space(s[b])) ++b;
  while (e > b && is_space(s[e - 1])) --e;
  return std::string(s.substr(b, e - b));
}

std::vector<std::string> QueryPool::texts() const {
  std::vector<std::string> out;
  out.reserve(queries_.size());
  for (const auto& q : queries_) out.push_back(q.text);
  return out;
}

namespace {

std::string optional_text(const json& obj, const char* key, std::size_t index) {
  const auto it = obj.find(key);
  if (it == obj.end() || it->is_null()) return {};
  if (!it->is_string()) {
    throw DatasetError("record " + std::to_string(index) + ": field \"" + key +
                           "\" is not a string",
                       index);
  }
  return it->get<std::string>();
}

}  // namespace

std::vector<InstructionRecord> load_instruction_dataset(std::string_view raw) {
  json doc;
  try {
    doc = json::parse(raw.begin(), raw.end());
  } catch (const json::parse_error& e) {
    throw DatasetError(std::string("malformed JSON: ") + e.what(), std::nullopt);
  }
  if (!doc.is_array()) throw DatasetError("top level is not an array", std::nullopt);

  std::vector<InstructionRecord> records;
  records.reserve(doc.size());
  for (std::size_t i = 0; i < doc.size(); ++i) {
    const json& obj = doc[i];
    if (!obj.is_object()) {
      throw DatasetError("record " + std::to_string(i) + " is not an object", i);
    }
    const auto it = obj.find("instruction");
    if (it == obj.end() || !it->is_string()) {
      throw DatasetError("record " + std::to_string(i) + ": missing \"instruction\"", i);
    }
    InstructionRecord rec;
    rec.instruction = it->get<std::string>();
    if (trim(rec.instruction).empty()) {
      throw DatasetError("record " + std::to_string(i) + ": empty \"instruction\"", i);
    }
    rec.input = optional_text(obj, "input", i);
    if (const auto out = obj.find("output"); out != obj.end() && !out->is_null()) {
      rec.output = out->is_string() ? out->get<std::string>() : out->dump();
    }
    records.push_back(std::move(rec));
  }
  return records;
}

std::vector<InstructionRecord> load_instruction_dataset_file(const std::filesystem::path& path) {
  std::ifstream in(path, std::ios::binary);
  if (!in) throw MissingArtifactError(path.string());
  std::ostringstream buf;
  buf << in.rdbuf();
  return load_instruction_dataset(buf.str());
}

std::string compose_query_text(std::string_view instruction, std::string_view input) {
  std::string text(instruction);
  if (!input.empty()) {
    text += '\n';
    text += input;
  }
  return text;
}

QueryPool build_query_pool(const std::vector<InstructionRecord>& records) {
  if (records.empty()) throw InputError("empty_dataset", "cannot build a pool from zero records");
  std::vector<Query> queries;
  queries.reserve(records.size());
  for (std::size_t i = 0; i < records.size(); ++i) {
    Query q;
    q.id = i;
    q.instruction = records[i].instruction;
    q.input = records[i].input;
    q.text = compose_query_text(q.instruction, q.input);
    q.source = QuerySource::kOriginal;
    queries.push_back(std::move(q));
  }
  return QueryPool(std::move(queries));
}

namespace {

std::vector<json> read_jsonl(const std::filesystem::path& path) {
  std::ifstream in(path);
  if (!in) throw MissingArtifactError(path.string());
  std::vector<json> rows;
  std::string line;
  std::size_t lineno = 0;
  while (std::getline(in, line)) {
    ++lineno;
    if (trim(line).empty()) continue;
    try {
      rows.push_back(json::parse(line));
    } catch (const json::parse_error& e) {
      throw InputError("jsonl", path.string() + ":" + std::to_string(lineno) + ": " + e.what());
    }
  }
  return rows;
}

QuerySource parse_source(const std::string& s) {
  if (s == "original") return QuerySource::kOriginal;
  if (s == "generated") return QuerySource::kGenerated;
  throw InputError("jsonl", "unknown query source \"" + s + "\"");
}

}  // namespace

void write_pool_jsonl(const std::filesystem::path& path, const QueryPool& pool) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("io", "cannot write " + path.string());
  for (const auto& q : pool) {
    ordered_json j;
    j["id"] = q.id;
    j["text"] = q.text;
    j["instruction"] = q.instruction;
    j["input"] = q.input;
    j["source"] = to_string(q.source);
    if (q.cluster_id) j["cluster_id"] = *q.cluster_id;
    out << j.dump() << '\n';
  }
}

QueryPool read_pool_jsonl(const std::filesystem::path& path) {
  QueryPool pool;
  try {
    for (const auto& j : read_jsonl(path)) {
      Query q;
      q.id = j.at("id").get<std::size_t>();
      q.text = j.at("text").get<std::string>();
      q.instruction = j.value("instruction", q.text);
      q.input = j.value("input", std::string{});
      q.source = parse_source(j.value("source", std::string{"original"}));
      if (j.contains("cluster_id")) q.cluster_id = j["cluster_id"].get<int>();
      pool.push_back(std::move(q));
    }
  } catch (const json::exception& e) {
    throw InputError("jsonl", path.string() + ": " + e.what());
  }
  return pool;
}

void write_generated_jsonl(const std::filesystem::path& path, const QueryPool& pool) {
  std::ofstream out(path, std::ios::binary | std::ios::trunc);
  if (!out) throw InputError("io", "cannot write " + path.string());
  for (const auto& q : pool) {
    ordered_json j;
    j["id"] = q.id;
    j["cluster_id"] = q.cluster_id ? json(*q.cluster_id) : json(nullptr);
    j["instruction"] = q.instruction;
    j["input"] = q.input;
    j["source"] = "generated";
    out << j.dump() << '\n';
  }
}

QueryPool read_generated_jsonl(const std::filesystem::path& path) {
  QueryPool pool;
  try {
    for (const auto& j : read_jsonl(path)) {
      Query q;
      q.id = j.at("id").get<std::size_t>();
      q.instruction = j.at("instruction").get<std::string>();
      q.input = j.value("input", std::string{});
      q.text = compose_query_text(q.instruction, q.input);
      q.source = QuerySource::kGenerated;
      if (!j.at("cluster_id").is_null()) q.cluster_id = j["cluster_id"].get<int>();
      pool.push_back(std::move(q));
    }
  } catch (const json::exception& e) {
    throw InputError("jsonl", path.string() + ": " + e.what());
  }
  return pool;
}

}  // namespace cliq
