#pragma once

// Small builders shared by the unit tests.

#include <atomic>
#include <filesystem>
#include <string>
#include <vector>

#include <unistd.h>

#include "mfsim/backends.hpp"
#include "mfsim/core.hpp"
#include "mfsim/corpus.hpp"

namespace mfsim::testing {

inline AgentProfile profile(std::string location = "Beijing", Gender g = Gender::female) {
  AgentProfile p;
  p.location = std::move(location);
  p.description = "reads the news";
  p.gender = g;
  return p;
}

/// Text event with `n` entries "comment i", steps 0..n-1.
inline Event text_event(std::size_t n, std::string id = "ev1") {
  Event e;
  e.event_id = std::move(id);
  e.topic = "city water supply rumor";
  e.domain_tag = DomainTag::news;
  for (std::size_t i = 0; i < n; ++i) {
    TimelineEntry t;
    t.profile = profile(i % 2 == 0 ? "Beijing" : "Shanghai");
    t.action.text = "comment " + std::to_string(i);
    t.action.step = i;
    t.action.popularity.followers = static_cast<std::int64_t>(i * 10);
    e.timeline.push_back(std::move(t));
  }
  return e;
}

/// Toy corpus from the default self-exciting generator.
inline SyntheticCorpus toy_corpus(std::size_t events, std::size_t steps, std::size_t agents,
                                  std::uint64_t seed) {
  return generate_synthetic(SyntheticGenConfig::self_exciting(events, steps, agents, seed));
}

/// Fresh directory under the system temp dir, removed on destruction.
class TempDir {
 public:
  TempDir() {
    static std::atomic<int> counter{0};
    path_ = std::filesystem::temp_directory_path() /
            ("mfsim_test_" + std::to_string(::getpid()) + "_" + std::to_string(counter++));
    std::filesystem::remove_all(path_);
    std::filesystem::create_directories(path_);
  }
  ~TempDir() {
    std::error_code ec;
    std::filesystem::remove_all(path_, ec);
  }
  TempDir(const TempDir&) = delete;
  TempDir& operator=(const TempDir&) = delete;
  const std::filesystem::path& path() const { return path_; }
  std::filesystem::path operator/(const std::string& name) const { return path_ / name; }

 private:
  std::filesystem::path path_;
};

}  // namespace mfsim::testing
