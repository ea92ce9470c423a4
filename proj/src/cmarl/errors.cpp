#include "cmarl/errors.hpp"

namespace cmarl {

const char* to_string(ErrorKind kind) {
  switch (kind) {
    case ErrorKind::kInvalidArgument: return "invalid argument";
    case ErrorKind::kConfig: return "configuration error";
    case ErrorKind::kIo: return "I/O error";
    case ErrorKind::kIndex: return "index error";
    case ErrorKind::kNumerical: return "numerical fault";
    case ErrorKind::kAnalysis: return "analysis error";
    case ErrorKind::kBudget: return "budget exceeded";
  }
  return "unknown error";
}

}  // namespace cmarl
