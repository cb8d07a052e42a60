#pragma once

#include "cascade/zoo.hpp"

namespace cascade {

// Plain-text model format: one keyword section per block, matrices as rows of
// numbers, '#' to end of line is a comment. Required sections: dims (r n p),
// bounds (p lines of lo hi), C, A0, A z for every z, B j z for every (j, z).
// Optional: name, description, V, flags, and a cost block (L, Phi,
// psi zero|quad, alpha). Numbers print with 17 significant digits, so
// export followed by parse reproduces the model exactly.
ZooEntry parse_model_file(const std::string& text);
ZooEntry load_model_file(const std::string& path);

// Custom psi has no text form; exporting such a cost throws BadKind.
std::string export_model_file(const ZooEntry& entry);
void save_model_file(const ZooEntry& entry, const std::string& path);

}  // namespace cascade
