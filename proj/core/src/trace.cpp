#include "pnp/trace.hpp"

#include <algorithm>
#include <cctype>

#include "pnp/errors.hpp"

namespace pnp {

const char* to_string(Method m) {
  switch (m) {
    case Method::FBS: return "fbs";
    case Method::ADMM: return "admm";
    case Method::DRS: return "drs";
  }
  return "?";
}

Method method_from_string(const std::string& s) {
  std::string t(s);
  std::transform(t.begin(), t.end(), t.begin(), [](unsigned char ch) { return std::tolower(ch); });
  if (t == "fbs") return Method::FBS;
  if (t == "admm") return Method::ADMM;
  if (t == "drs") return Method::DRS;
  throw DomainError("unknown method '" + s + "' (expected fbs, admm or drs)");
}

const char* to_string(RunStatus s) {
  switch (s) {
    case RunStatus::converged: return "converged";
    case RunStatus::max_iter: return "max_iter";
    case RunStatus::failed: return "failed";
  }
  return "?";
}

}  // namespace pnp
