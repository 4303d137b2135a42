#pragma once

#include <stdexcept>
#include <string>

namespace sketchgnn {

// Every error carries the name of the module that raised it so the CLI can
// print a useful diagnostic.
class Error : public std::runtime_error {
public:
    Error(std::string module, const std::string& what)
        : std::runtime_error(module + ": " + what), module_(std::move(module)) {}

    const std::string& module() const noexcept { return module_; }

private:
    std::string module_;
};

#define SKETCHGNN_ERROR(Name)                                                 \
    class Name : public Error {                                               \
    public:                                                                   \
        using Error::Error;                                                   \
    }

SKETCHGNN_ERROR(ParseError);
SKETCHGNN_ERROR(ValidationError);
SKETCHGNN_ERROR(DegenerateInput);
SKETCHGNN_ERROR(InvalidArgument);
SKETCHGNN_ERROR(ShapeError);
SKETCHGNN_ERROR(AggregationError);
SKETCHGNN_ERROR(NumericsError);

#undef SKETCHGNN_ERROR

} // namespace sketchgnn
