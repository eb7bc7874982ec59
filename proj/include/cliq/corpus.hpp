#pragma once

#include <cstddef>
#include <filesystem>
#include <optional>
#include <string>
#include <string_view>
#include <vector>

namespace cliq {

struct InstructionRecord {
  std::string instruction;
  std::string input;
  std::optional<std::string> output;
};

enum class QuerySource { kOriginal, kGenerated };

std::string_view to_string(QuerySource source);

struct Query {
  std::size_t id = 0;
  std::string text;
  // The fields `text` was built from. Kept so generated queries can be
  // written back out in instruction/input form.
  std::string instruction;
  std::string input;
  QuerySource source = QuerySource::kOriginal;
  std::optional<int> cluster_id;
};

// Ordered query collection. Ids are unique; order is ingestion order.
class QueryPool {
 public:
  QueryPool() = default;
  explicit QueryPool(std::vector<Query> queries) : queries_(std::move(queries)) {}

  std::size_t size() const noexcept { return queries_.size(); }
  bool empty() const noexcept { return queries_.empty(); }

  const Query& operator[](std::size_t i) const { return queries_[i]; }
  const std::vector<Query>& queries() const noexcept { return queries_; }

  std::vector<std::string> texts() const;

  void push_back(Query q) { queries_.push_back(std::move(q)); }

  auto begin() const { return queries_.begin(); }
  auto end() const { return queries_.end(); }

 private:
  std::vector<Query> queries_;
};

// Decodes a JSON array of {"instruction", "input"?, "output"?} objects.
// Throws DatasetError naming the record index on any malformed record.
std::vector<InstructionRecord> load_instruction_dataset(std::string_view raw);
std::vector<InstructionRecord> load_instruction_dataset_file(const std::filesystem::path& path);

// instruction alone when input is empty, else instruction + '\n' + input.
std::string compose_query_text(std::string_view instruction, std::string_view input);

// Ids 0..N-1 in record order. No deduplication.
QueryPool build_query_pool(const std::vector<InstructionRecord>& records);

// JSONL persistence: {"id","text","instruction","input","source","cluster_id"?}.
void write_pool_jsonl(const std::filesystem::path& path, const QueryPool& pool);
QueryPool read_pool_jsonl(const std::filesystem::path& path);

// Generated-query JSONL: {"id","cluster_id","instruction","input","source":"generated"}.
void write_generated_jsonl(const std::filesystem::path& path, const QueryPool& pool);
QueryPool read_generated_jsonl(const std::filesystem::path& path);

std::string trim(std::string_view s);

}  // namespace cliq
