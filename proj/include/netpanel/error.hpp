#pragma once

#include <stdexcept>
#include <string>
#include <vector>

namespace netpanel {

/// Bad input: malformed files, invalid specs, unresolvable covariates.
class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// A model would read information from the held-out wave.
class LeakageError : public std::runtime_error {
public:
    LeakageError(const std::string& what, std::vector<std::string> terms)
        : std::runtime_error(what), terms_(std::move(terms)) {}

    const std::vector<std::string>& terms() const noexcept { return terms_; }

private:
    std::vector<std::string> terms_;
};

}  // namespace netpanel
