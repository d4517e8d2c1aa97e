#pragma once

#include <stdexcept>
#include <string>

namespace mergemeter {

// Error categories map 1:1 onto CLI exit codes.
enum class errc {
    validation = 2,
    numeric    = 3,
    io         = 4,
};

class error : public std::runtime_error {
public:
    error(errc kind, const std::string & what) : std::runtime_error(what), kind_(kind) {}
    errc kind() const noexcept { return kind_; }

private:
    errc kind_;
};

[[noreturn]] inline void fail_validation(const std::string & msg) { throw error(errc::validation, msg); }
[[noreturn]] inline void fail_numeric(const std::string & msg)    { throw error(errc::numeric, msg); }
[[noreturn]] inline void fail_io(const std::string & msg)         { throw error(errc::io, msg); }

} // namespace mergemeter
