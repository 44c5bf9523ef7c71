#pragma once

#include <cstdint>
#include <sstream>
#include <stdexcept>
#include <string>
#include <vector>

namespace pirl {

// Raised when a numeric invariant breaks (non-finite values, degenerate
// embeddings). Training aborts the step on this instead of clamping.
class numeric_error : public std::runtime_error {
public:
  explicit numeric_error(const std::string& msg) : std::runtime_error(msg) {}
};

// Raised for malformed configs, shapes, files and argument preconditions.
class invalid_argument_error : public std::runtime_error {
public:
  explicit invalid_argument_error(const std::string& msg) : std::runtime_error(msg) {}
};

namespace detail {
inline void format_into(std::ostringstream&) {}
template <class T, class... Rest>
void format_into(std::ostringstream& os, const T& v, const Rest&... rest) {
  os << v;
  format_into(os, rest...);
}
}  // namespace detail

template <class... Args>
std::string str_cat(const Args&... args) {
  std::ostringstream os;
  detail::format_into(os, args...);
  return os.str();
}

}  // namespace pirl

#define PIRL_CHECK(cond, ...)                                          \
  do {                                                                 \
    if (!(cond)) throw ::pirl::invalid_argument_error(::pirl::str_cat(__VA_ARGS__)); \
  } while (0)

#define PIRL_CHECK_NUMERIC(cond, ...)                                  \
  do {                                                                 \
    if (!(cond)) throw ::pirl::numeric_error(::pirl::str_cat(__VA_ARGS__)); \
  } while (0)
