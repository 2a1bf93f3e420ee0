#ifndef FNPC_ERROR_H_
#define FNPC_ERROR_H_

#include <stdexcept>
#include <string>

namespace fnpc {

// Every failure raised by the library. Messages are meant for end users and
// carry enough context (file, line, offset, frame) to act on.
class Error : public std::runtime_error {
 public:
  explicit Error(const std::string& what) : std::runtime_error(what) {}
};

}  // namespace fnpc

#endif  // FNPC_ERROR_H_
