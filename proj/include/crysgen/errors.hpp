#pragma once

#include <stdexcept>
#include <string>

namespace crysgen {

// Error categories map onto CLI exit codes: validation -> 2, I/O -> 3,
// numeric divergence -> 4.
struct ValidationError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct IoError : std::runtime_error {
  using std::runtime_error::runtime_error;
};
struct NumericError : std::runtime_error {
  using std::runtime_error::runtime_error;
};

#define CRYSGEN_VALIDATION_ERROR(Name)                                  \
  struct Name : ValidationError {                                       \
    explicit Name(const std::string& what)                              \
        : ValidationError(std::string(#Name) + ": " + what) {}          \
  }

#define CRYSGEN_NUMERIC_ERROR(Name)                                     \
  struct Name : NumericError {                                          \
    explicit Name(const std::string& what)                              \
        : NumericError(std::string(#Name) + ": " + what) {}             \
  }

// crystal-core
CRYSGEN_VALIDATION_ERROR(NonPositiveLength);
CRYSGEN_VALIDATION_ERROR(DegenerateAngles);
CRYSGEN_VALIDATION_ERROR(SingularLattice);
CRYSGEN_VALIDATION_ERROR(NonFiniteInput);
CRYSGEN_VALIDATION_ERROR(InvalidCrystal);

// cif-text
CRYSGEN_VALIDATION_ERROR(SyntaxError);
CRYSGEN_VALIDATION_ERROR(UnknownElement);
CRYSGEN_VALIDATION_ERROR(DegenerateLattice);
CRYSGEN_VALIDATION_ERROR(EmptyStructure);
CRYSGEN_VALIDATION_ERROR(UnknownToken);
CRYSGEN_VALIDATION_ERROR(BadFormula);
CRYSGEN_VALIDATION_ERROR(BadSpaceGroup);

// proposer
CRYSGEN_VALIDATION_ERROR(EmptyCorpus);
CRYSGEN_VALIDATION_ERROR(ExhaustedAttempts);
CRYSGEN_VALIDATION_ERROR(UntrainedProposer);

// diffusion-processes
CRYSGEN_VALIDATION_ERROR(BadScheduleParams);
CRYSGEN_VALIDATION_ERROR(BadTimestep);
CRYSGEN_VALIDATION_ERROR(NonPositiveSigma);
CRYSGEN_VALIDATION_ERROR(ShapeMismatch);

// trainer
CRYSGEN_VALIDATION_ERROR(EmptyDataset);
CRYSGEN_NUMERIC_ERROR(NonFiniteLoss);

// denoiser-net
CRYSGEN_NUMERIC_ERROR(NonFiniteActivation);
CRYSGEN_NUMERIC_ERROR(StaleCache);

// sampler
CRYSGEN_VALIDATION_ERROR(TauOutOfRange);
CRYSGEN_VALIDATION_ERROR(InvalidProposal);
CRYSGEN_NUMERIC_ERROR(NonFiniteState);

// metrics
CRYSGEN_VALIDATION_ERROR(EmptySet);
CRYSGEN_VALIDATION_ERROR(LengthMismatch);

#undef CRYSGEN_VALIDATION_ERROR
#undef CRYSGEN_NUMERIC_ERROR

}  // namespace crysgen
