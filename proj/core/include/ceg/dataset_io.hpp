#pragma once

#include <string>

#include "ceg/event.hpp"

namespace ceg {

// JSONL dataset format: one object per line,
//   {"T": <real>, "events": [[t, m1, ..., m_dm], ...]}
// with events sorted by t. An optional "mark_bounds": [[lo, hi], ...]
// field on the first line declares the mark-space box.
Dataset load_dataset(const std::string& path);

// Writes the JSONL format above with 17 significant digits per value, so
// load(save(ds)) round-trips every double exactly.
void save_dataset(const Dataset& ds, const std::string& path);

// Formats a double with 17 significant digits (shortest exact form is not
// used; the wire format pins the digit count).
std::string format_double(double v);

} // namespace ceg
