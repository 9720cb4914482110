#pragma once

// Text records for classifiers and selectors, CSV datasets, and atomic file
// writes. Reals are written with 17 significant digits so records round-trip
// bit-exactly.

#include "pqtds/classifier.hpp"
#include "pqtds/icf.hpp"
#include "pqtds/polycore.hpp"

#include <iosfwd>
#include <string>

namespace pqtds::io {

std::string format_real(double v);

void write_classifier(std::ostream& out, const Classifier& c);
/// Throws FormatError on malformed input.
Classifier read_classifier(std::istream& in);

/// Selector record with the filtering configuration echoed so the constraint
/// sets can be rebuilt from the reference sample.
void write_selector(std::ostream& out, const Selector& s, const ICFConfig& cfg);

struct SelectorRecord {
  Selector selector;
  ICFConfig config;
};

/// Rebuilds the selector against its reference sample; throws FormatError if
/// the rebuilt constraint-set fingerprints differ from the recorded ones.
SelectorRecord read_selector(std::istream& in, const Sample& reference);

/// Header "x1,...,xd[,label]". Labels are written when present.
void write_csv(std::ostream& out, const Sample& s);
/// Reads a CSV with an optional header; a header column named "label" (or
/// the last column when label_last is set and there is no header) holds
/// labels in {0,1}.
Sample read_csv(std::istream& in, bool label_last = false);
Sample load_csv(const std::string& path, bool label_last = false);

/// Writes to a temporary sibling and renames it over path.
void atomic_write(const std::string& path, const std::string& content);

}  // namespace pqtds::io
