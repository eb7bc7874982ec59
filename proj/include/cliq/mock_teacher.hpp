#pragma once

#include <atomic>
#include <cstddef>
#include <string>

#include "cliq/http.hpp"

namespace cliq {

// Deterministic stand-in for an OpenAI-compatible chat endpoint. It reads
// the requested count and the cluster examples out of the prompt and answers
// with that many template-diversified instructions about the first example,
// wrapped in a markdown fence like a real chat model would.
class MockTeacherTransport final : public HttpTransport {
 public:
  HttpResponse post_json(const std::string& path, const std::string& body) override;

  std::size_t requests() const noexcept { return requests_.load(); }

 private:
  std::atomic<std::size_t> requests_{0};
};

// Builds the assistant text the mock would send for a rendered prompt.
std::string mock_teacher_reply(const std::string& prompt);

}  // namespace cliq
