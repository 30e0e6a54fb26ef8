#ifndef OPTINPUT_ERRORS_HPP
#define OPTINPUT_ERRORS_HPP

#include <stdexcept>
#include <string>

namespace optinput {

/// Base class for every error raised by the library.
class Error : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

#define OPTINPUT_DEFINE_ERROR(Name)                 \
    class Name : public Error {                     \
    public:                                         \
        explicit Name(const std::string& what)      \
            : Error(std::string(#Name ": ") + what) \
        {                                           \
        }                                           \
    }

OPTINPUT_DEFINE_ERROR(NotPositiveDefinite);
OPTINPUT_DEFINE_ERROR(ConvergenceFailure);
OPTINPUT_DEFINE_ERROR(InvalidHyperparameter);
OPTINPUT_DEFINE_ERROR(OrderTooLarge);
OPTINPUT_DEFINE_ERROR(SingularRegressor);
OPTINPUT_DEFINE_ERROR(SearchFailure);
OPTINPUT_DEFINE_ERROR(InvalidWeights);
OPTINPUT_DEFINE_ERROR(DimensionMismatch);
OPTINPUT_DEFINE_ERROR(TooManyVertices);
OPTINPUT_DEFINE_ERROR(PreconditionViolated);
OPTINPUT_DEFINE_ERROR(ZeroInput);
OPTINPUT_DEFINE_ERROR(DegenerateTruth);
OPTINPUT_DEFINE_ERROR(ConfigError);

#undef OPTINPUT_DEFINE_ERROR

} // namespace optinput

#endif // OPTINPUT_ERRORS_HPP
