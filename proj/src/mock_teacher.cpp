#include "cliq/mock_teacher.hpp"

#include <array>
#include <regex>
#include <sstream>

#include <nlohmann/json.hpp>

namespace cliq {

namespace {

constexpr std::array<std::string_view, 8> kFrames = {
    "Explain in plain terms: {}",
    "Give a step-by-step answer for this: {}",
    "Write a short response that addresses {}",
    "Suppose a beginner asks you this. {}",
    "Provide two contrasting perspectives on {}",
    "In under fifty words, respond to {}",
    "Draft a friendly reply for someone wondering about {}",
    "List the key points needed to handle {}",
};

std::string first_line(const std::string& s) {
  const auto nl = s.find('\n');
  return nl == std::string::npos ? s : s.substr(0, nl);
}

}  // namespace

std::string mock_teacher_reply(const std::string& prompt) {
  std::size_t count = 1;
  static const std::regex count_re("exactly ([0-9]+) new instructions");
  std::smatch m;
  if (std::regex_search(prompt, m, count_re)) count = std::stoul(m[1].str());

  std::string topic = "the topic";
  static const std::regex example_re("\\[1\\] ([^\\n]*)");
  if (std::regex_search(prompt, m, example_re)) topic = first_line(m[1].str());

  nlohmann::ordered_json arr = nlohmann::ordered_json::array();
  for (std::size_t i = 0; i < count; ++i) {
    std::string text(kFrames[i % kFrames.size()]);
    text.replace(text.find("{}"), 2, topic);
    if (i >= kFrames.size()) text += " (variant " + std::to_string(i / kFrames.size() + 1) + ")";
    arr.push_back({{"instruction", text}, {"input", ""}});
  }
  return "Here are the new instructions:\n```json\n" + arr.dump(2) + "\n```\n";
}

HttpResponse MockTeacherTransport::post_json(const std::string& path, const std::string& body) {
  ++requests_;
  HttpResponse r;
  if (path != "/chat/completions") {
    r.status = 404;
    return r;
  }
  const auto req = nlohmann::json::parse(body, nullptr, false);
  if (req.is_discarded() || !req.contains("messages")) {
    r.status = 400;
    return r;
  }
  const std::string prompt = req["messages"].at(0).at("content").get<std::string>();
  nlohmann::ordered_json reply;
  reply["id"] = "mock";
  reply["object"] = "chat.completion";
  reply["model"] = req.value("model", "mock");
  reply["choices"] = nlohmann::ordered_json::array(
      {{{"index", 0},
        {"message", {{"role", "assistant"}, {"content", mock_teacher_reply(prompt)}}},
        {"finish_reason", "stop"}}});
  r.status = 200;
  r.body = reply.dump();
  return r;
}

}  // namespace cliq
