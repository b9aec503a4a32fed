#ifndef PREVIS_STORE_HPP
#define PREVIS_STORE_HPP

#include "previs/json_util.hpp"

#include <filesystem>
#include <map>
#include <optional>
#include <set>
#include <shared_mutex>

namespace previs {

/// One binary sidecar of an artifact.
struct Blob {
  std::string dtype; // "f64le", "u32le"
  std::string bytes;
};

/// In-memory form of a stored artifact: a JSON manifest plus named blobs.
struct Artifact {
  std::string kind; // mesh | ensemble | basis | model | report | field
  Json meta;
  std::map<std::string, Blob> blobs;
};

struct ArtifactInfo {
  std::string id;
  std::string kind;
  std::string created_at; // UTC, ISO 8601
  std::filesystem::path manifest_path;
};

bool is_artifact_kind(const std::string &kind);

/// Directory-backed artifact store:
///   root/{kind}/{id}/manifest.json + {blob}.bin
/// Every blob's SHA-256 is recorded in the manifest and checked on load.
/// Thread safe: saves are exclusive, loads and listings shared.
class ArtifactStore {
public:
  explicit ArtifactStore(std::filesystem::path root);

  std::string save(const Artifact &artifact);
  /// Allocates an id that save_as can later fill.
  std::string reserve_id(const std::string &kind);
  void save_as(const std::string &id, const Artifact &artifact);

  /// Throws NotFound for unknown ids, IntegrityError on hash mismatch.
  Artifact load(const std::string &id) const;
  std::optional<ArtifactInfo> find(const std::string &id) const;
  bool contains(const std::string &id) const { return find(id).has_value(); }
  /// All artifacts, optionally of one kind, oldest first.
  std::vector<ArtifactInfo> list(const std::string &kind = {}) const;

  const std::filesystem::path &root() const { return root_; }

private:
  std::string new_id_locked(const std::string &kind);
  void write_locked(const std::string &id, const Artifact &artifact);

  std::filesystem::path root_;
  mutable std::shared_mutex mutex_;
  std::map<std::string, ArtifactInfo> index_;
  std::set<std::string> reserved_;
  std::uint64_t counter_ = 0;
};

} // namespace previs

#endif
