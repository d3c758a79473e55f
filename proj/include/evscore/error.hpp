#pragma once

#include <stdexcept>
#include <string>

namespace evscore {

// Error kinds surfaced by the library. The names returned by errc_name()
// are stable: they appear verbatim in diagnostics output and CLI messages.
enum class Errc {
  // event log parsing
  malformed_line,
  bad_timestamp,
  empty_pv,
  stream_io,
  // tokenization / channel grammar
  empty_result,
  not_convention,
  forbidden_character,
  bad_device_instance,
  // embeddings
  empty_vocab,
  non_finite_update,
  dimension_mismatch,
  // detector
  empty_dataset,
  // pipeline
  empty_corpus,
  version_mismatch,
  corrupt_bundle,
  // synth / eval
  spec_invalid,
  degenerate_labels,
  // bad configuration or argument values
  invalid_config,
};

inline const char* errc_name(Errc c) {
  switch (c) {
    case Errc::malformed_line: return "MalformedLine";
    case Errc::bad_timestamp: return "BadTimestamp";
    case Errc::empty_pv: return "EmptyPV";
    case Errc::stream_io: return "StreamIO";
    case Errc::empty_result: return "EmptyResult";
    case Errc::not_convention: return "NotConvention";
    case Errc::forbidden_character: return "ForbiddenCharacter";
    case Errc::bad_device_instance: return "BadDeviceInstance";
    case Errc::empty_vocab: return "EmptyVocab";
    case Errc::non_finite_update: return "NonFiniteUpdate";
    case Errc::dimension_mismatch: return "DimensionMismatch";
    case Errc::empty_dataset: return "EmptyDataset";
    case Errc::empty_corpus: return "EmptyCorpus";
    case Errc::version_mismatch: return "VersionMismatch";
    case Errc::corrupt_bundle: return "CorruptBundle";
    case Errc::spec_invalid: return "SpecInvalid";
    case Errc::degenerate_labels: return "DegenerateLabels";
    case Errc::invalid_config: return "InvalidConfig";
  }
  return "Unknown";
}

class Error : public std::runtime_error {
 public:
  Error(Errc code, const std::string& message)
      : std::runtime_error(std::string(errc_name(code)) + ": " + message), code_(code) {}

  Errc code() const noexcept { return code_; }

 private:
  Errc code_;
};

}  // namespace evscore
