#pragma once

#include <string>

namespace tqa {

// ISO-8601 UTC timestamp. Honors the TABLEQA_NOW environment variable so
// scripted runs produce byte-identical outputs.
std::string now_iso();

} // namespace tqa
