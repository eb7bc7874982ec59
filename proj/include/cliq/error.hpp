#pragma once

#include <cstddef>
#include <optional>
#include <stdexcept>
#include <string>

namespace cliq {

// Base for every error raised by the library. `kind` is a stable,
// machine-readable tag used by the CLI error records.
class Error : public std::runtime_error {
 public:
  Error(std::string kind, const std::string& message)
      : std::runtime_error(message), kind_(std::move(kind)) {}

  const std::string& kind() const noexcept { return kind_; }

 private:
  std::string kind_;
};

// Bad input supplied by the user: malformed files, invalid configuration,
// contract violations. Maps to CLI exit code 1.
class InputError : public Error {
 public:
  using Error::Error;
};

// Dataset decoding failure; carries the offending record index when known.
class DatasetError : public InputError {
 public:
  DatasetError(const std::string& message, std::optional<std::size_t> index)
      : InputError("dataset", message), index_(index) {}

  std::optional<std::size_t> record_index() const noexcept { return index_; }

 private:
  std::optional<std::size_t> index_;
};

// A required stage artifact is absent.
class MissingArtifactError : public InputError {
 public:
  explicit MissingArtifactError(const std::string& path)
      : InputError("missing_artifact", "missing artifact: " + path), path_(path) {}

  const std::string& path() const noexcept { return path_; }

 private:
  std::string path_;
};

// Every cluster fell below the minimum size.
class AllClustersDroppedError : public InputError {
 public:
  explicit AllClustersDroppedError(const std::string& message)
      : InputError("all_clusters_dropped", message) {}
};

// Failure talking to a remote model endpoint. Maps to CLI exit code 2.
class UpstreamError : public Error {
 public:
  UpstreamError(const std::string& message, int attempts = 0, int last_status = 0)
      : Error("upstream", message), attempts_(attempts), last_status_(last_status) {}

  int attempts() const noexcept { return attempts_; }
  int last_status() const noexcept { return last_status_; }

 private:
  int attempts_;
  int last_status_;
};

// The teacher's reply could not be turned into any query.
class ParseError : public Error {
 public:
  using Error::Error;
};

}  // namespace cliq
