#pragma once

#include <map>
#include <string>

#include "smellstab/code_model.hpp"

namespace smellstab::testing {

inline SourceCorpus corpus_of(const std::map<std::string, std::string>& files, std::string project = "p") {
  IngestOptions opts;
  opts.project = std::move(project);
  return ingest_sources(files, "snap", opts);
}

inline ArtifactRef ref_of(const SourceCorpus& c, std::string_view display) {
  auto r = c.find_display(display);
  if (!r) throw LookupError("fixture artifact missing: " + std::string(display));
  return *r;
}

}  // namespace smellstab::testing
