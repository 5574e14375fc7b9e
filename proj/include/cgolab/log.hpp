#pragma once

#include <functional>
#include <iostream>
#include <mutex>
#include <string>

namespace cgolab {

using WarningSink = std::function<void(const std::string&)>;

inline WarningSink& warning_sink() {
  static WarningSink sink = [](const std::string& m) { std::cerr << "warning: " << m << "\n"; };
  return sink;
}

inline void warn(const std::string& message) {
  static std::mutex mu;
  std::lock_guard<std::mutex> lock(mu);
  if (warning_sink()) warning_sink()(message);
}

}  // namespace cgolab
