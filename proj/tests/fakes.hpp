#pragma once

// Judge doubles for tests.

#include <atomic>
#include <functional>
#include <mutex>
#include <string>
#include <vector>

#include "runvar/judge.hpp"

/// Answers every prompt with a caller-supplied function and records prompts.
class ScriptedJudge final : public runvar::JudgeTransport {
 public:
  explicit ScriptedJudge(std::function<std::string(std::string_view)> reply) : reply_(std::move(reply)) {}
  std::string complete(std::string_view prompt) override {
    {
      std::lock_guard lock(mutex_);
      prompts_.emplace_back(prompt);
    }
    return reply_(prompt);
  }
  bool deterministic() const noexcept override { return true; }
  std::vector<std::string> prompts() const {
    std::lock_guard lock(mutex_);
    return prompts_;
  }
  std::size_t calls() const { return prompts().size(); }

 private:
  std::function<std::string(std::string_view)> reply_;
  mutable std::mutex mutex_;
  std::vector<std::string> prompts_;
};

inline bool contains(std::string_view haystack, std::string_view needle) {
  return haystack.find(needle) != std::string_view::npos;
}
