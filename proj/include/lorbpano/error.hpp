#ifndef LORBPANO_ERROR_HPP
#define LORBPANO_ERROR_HPP

#include <stdexcept>
#include <string>

namespace lorbpano {

struct Error : std::runtime_error {
    using std::runtime_error::runtime_error;
};

#define LORBPANO_DEFINE_ERROR(Name)          \
    struct Name : Error {                    \
        using Error::Error;                  \
    }

// imgcore
LORBPANO_DEFINE_ERROR(FileNotFound);
LORBPANO_DEFINE_ERROR(UnsupportedFormat);
LORBPANO_DEFINE_ERROR(CorruptData);
LORBPANO_DEFINE_ERROR(InvalidSigma);
LORBPANO_DEFINE_ERROR(ImageTooSmall);
LORBPANO_DEFINE_ERROR(BadTargetDims);

// feature extraction
LORBPANO_DEFINE_ERROR(NoOverlap);
LORBPANO_DEFINE_ERROR(OverlapExceedsImage);
LORBPANO_DEFINE_ERROR(RegionTooSmall);
LORBPANO_DEFINE_ERROR(WindowOutOfBounds);
LORBPANO_DEFINE_ERROR(PatchOutOfBounds);

// matching / estimation
LORBPANO_DEFINE_ERROR(LengthMismatch);
LORBPANO_DEFINE_ERROR(BadParams);
LORBPANO_DEFINE_ERROR(TooManyProbes);
LORBPANO_DEFINE_ERROR(ParamMismatch);
LORBPANO_DEFINE_ERROR(EmptyInput);
LORBPANO_DEFINE_ERROR(DegenerateConfiguration);
LORBPANO_DEFINE_ERROR(NumericalFailure);
LORBPANO_DEFINE_ERROR(InsufficientMatches);
LORBPANO_DEFINE_ERROR(NoModelFound);

// compositing
LORBPANO_DEFINE_ERROR(SingularHomography);
LORBPANO_DEFINE_ERROR(MaskMismatch);
LORBPANO_DEFINE_ERROR(TooManyLevels);

// pipeline
LORBPANO_DEFINE_ERROR(CapacityOverflow);
LORBPANO_DEFINE_ERROR(NoValidHomographyYet);

// config / cli
LORBPANO_DEFINE_ERROR(ParseError);
LORBPANO_DEFINE_ERROR(ValidationError);
LORBPANO_DEFINE_ERROR(MissingFrames);

#undef LORBPANO_DEFINE_ERROR

}  // namespace lorbpano

#endif
