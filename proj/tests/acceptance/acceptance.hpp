#pragma once

// Acceptance criteria runner: every criterion prints exactly one
// [PASS]/[FAIL] line; any failure fails the binary.

#include <functional>
#include <sstream>
#include <string>
#include <vector>

namespace silofl::acceptance {

class Check {
 public:
  // Measured values worth showing even on success.
  void note(const std::string& what) {
    notes_ << "       - " << what << "\n";
  }
  void require(bool condition, const std::string& what) {
    if (!condition) {
      ok_ = false;
      failures_ << "       * " << what << "\n";
    }
  }
  template <typename T>
  void equal_within(T got, T want, T tolerance, const std::string& what) {
    const bool cond = std::abs(got - want) <= tolerance;
    if (!cond) {
      std::ostringstream msg;
      msg << what << ": got " << got << ", want " << want << " +- "
          << tolerance;
      require(false, msg.str());
    }
  }
  bool ok() const { return ok_; }
  std::string failures() const { return failures_.str(); }
  std::string notes() const { return notes_.str(); }

 private:
  bool ok_ = true;
  std::ostringstream failures_;
  std::ostringstream notes_;
};

struct Criterion {
  int number = 0;
  std::string title;
  std::function<void(Check&)> body;
};

std::vector<Criterion>& registry();

inline void register_criterion(int number, std::string title,
                               std::function<void(Check&)> body) {
  registry().push_back({number, std::move(title), std::move(body)});
}

void register_protocol_criteria();
void register_noise_mixnet_criteria();
void register_math_criteria();
void register_training_criteria();

int run_all(int argc, char** argv);

}  // namespace silofl::acceptance
