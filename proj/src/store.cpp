#include "previs/store.hpp"

#include "previs/binary_io.hpp"
#include "previs/hash.hpp"

#include <algorithm>
#include <cctype>
#include <chrono>
#include <cstdio>
#include <ctime>
#include <mutex>
#include <random>
#include <tuple>

namespace previs {

namespace fs = std::filesystem;

namespace {

constexpr const char *kKinds[] = {"mesh",  "ensemble", "basis",
                                  "model", "report",   "field"};

std::string utc_now() {
  const auto now = std::chrono::system_clock::now();
  const std::time_t t = std::chrono::system_clock::to_time_t(now);
  const auto micros = std::chrono::duration_cast<std::chrono::microseconds>(
                          now.time_since_epoch())
                          .count() %
                      1000000;
  std::tm tm{};
  gmtime_r(&t, &tm);
  char buf[64];
  std::snprintf(buf, sizeof buf, "%04d-%02d-%02dT%02d:%02d:%02d.%06lldZ",
                tm.tm_year + 1900, tm.tm_mon + 1, tm.tm_mday, tm.tm_hour,
                tm.tm_min, tm.tm_sec, static_cast<long long>(micros));
  return buf;
}

std::string kind_of_id(const std::string &id) {
  const auto dash = id.find('-');
  return dash == std::string::npos ? std::string() : id.substr(0, dash);
}

bool safe_id(const std::string &id) {
  if (id.empty() || id.size() > 128)
    return false;
  for (char c : id)
    if (!(std::isalnum(static_cast<unsigned char>(c)) || c == '-' || c == '_'))
      return false;
  return true;
}

} // namespace

bool is_artifact_kind(const std::string &kind) {
  for (const char *k : kKinds)
    if (kind == k)
      return true;
  return false;
}

ArtifactStore::ArtifactStore(fs::path root) : root_(std::move(root)) {
  fs::create_directories(root_);
  for (const char *kind : kKinds) {
    const fs::path dir = root_ / kind;
    if (!fs::is_directory(dir))
      continue;
    for (const auto &entry : fs::directory_iterator(dir)) {
      const fs::path manifest = entry.path() / "manifest.json";
      if (!fs::is_regular_file(manifest))
        continue;
      try {
        const Json j = Json::parse(read_file(manifest));
        ArtifactInfo info{j.at("id").get<std::string>(), kind,
                          j.at("created_at").get<std::string>(), manifest};
        index_.emplace(info.id, std::move(info));
      } catch (const std::exception &) {
        // Half-written or foreign directory; load() will report it if asked.
      }
    }
  }
}

std::string ArtifactStore::new_id_locked(const std::string &kind) {
  if (!is_artifact_kind(kind))
    throw InvalidArgument("unknown artifact kind '" + kind + "'");
  static thread_local std::random_device device;
  for (;;) {
    Sha256 h;
    h.update(kind);
    h.update(utc_now());
    const std::uint64_t salt[2] = {++counter_, std::uint64_t(device()) << 32 | device()};
    h.update(salt, sizeof salt);
    std::string id = kind + "-" + h.hex().substr(0, 16);
    if (!index_.contains(id) && !reserved_.contains(id))
      return id;
  }
}

std::string ArtifactStore::reserve_id(const std::string &kind) {
  std::unique_lock lock(mutex_);
  std::string id = new_id_locked(kind);
  reserved_.insert(id);
  return id;
}

std::string ArtifactStore::save(const Artifact &artifact) {
  std::unique_lock lock(mutex_);
  const std::string id = new_id_locked(artifact.kind);
  write_locked(id, artifact);
  return id;
}

void ArtifactStore::save_as(const std::string &id, const Artifact &artifact) {
  std::unique_lock lock(mutex_);
  if (!reserved_.contains(id))
    throw InvalidArgument("id '" + id + "' was not reserved");
  if (kind_of_id(id) != artifact.kind)
    throw InvalidArgument("reserved id does not match artifact kind");
  write_locked(id, artifact);
  reserved_.erase(id);
}

void ArtifactStore::write_locked(const std::string &id,
                                 const Artifact &artifact) {
  if (!is_artifact_kind(artifact.kind))
    throw InvalidArgument("unknown artifact kind '" + artifact.kind + "'");
  const fs::path dir = root_ / artifact.kind / id;
  fs::create_directories(dir);

  Json blobs = Json::object();
  for (const auto &[name, blob] : artifact.blobs) {
    if (!safe_id(name))
      throw InvalidArgument("invalid blob name '" + name + "'");
    const std::string file = name + ".bin";
    write_file(dir / file, blob.bytes);
    blobs[name] = {{"file", file},
                   {"dtype", blob.dtype},
                   {"bytes", blob.bytes.size()},
                   {"sha256", sha256_hex(blob.bytes)}};
  }
  ArtifactInfo info{id, artifact.kind, utc_now(), dir / "manifest.json"};
  const Json manifest = {{"id", id},
                         {"kind", artifact.kind},
                         {"created_at", info.created_at},
                         {"format", 1},
                         {"blobs", blobs},
                         {"meta", artifact.meta}};
  // Manifest last and via rename, so a listed artifact is always complete.
  const fs::path tmp = dir / "manifest.json.tmp";
  write_file(tmp, manifest.dump(2));
  fs::rename(tmp, info.manifest_path);
  index_[id] = std::move(info);
}

std::optional<ArtifactInfo> ArtifactStore::find(const std::string &id) const {
  std::shared_lock lock(mutex_);
  const auto it = index_.find(id);
  if (it == index_.end())
    return std::nullopt;
  return it->second;
}

Artifact ArtifactStore::load(const std::string &id) const {
  const auto info = find(id);
  if (!info)
    throw NotFound("no artifact with id '" + id + "'");
  std::shared_lock lock(mutex_);

  Json manifest;
  try {
    manifest = Json::parse(read_file(info->manifest_path));
  } catch (const std::exception &e) {
    throw IntegrityError("unreadable manifest for " + id + ": " + e.what());
  }
  if (manifest.value("id", "") != id || manifest.value("kind", "") != info->kind)
    throw IntegrityError("manifest of " + id + " does not describe it");

  Artifact out;
  out.kind = info->kind;
  out.meta = manifest.value("meta", Json::object());
  const fs::path dir = info->manifest_path.parent_path();
  for (const auto &[name, entry] : manifest.at("blobs").items()) {
    Blob blob;
    blob.dtype = entry.at("dtype").get<std::string>();
    try {
      blob.bytes = read_file(dir / entry.at("file").get<std::string>());
    } catch (const std::exception &) {
      throw IntegrityError("missing blob '" + name + "' of " + id);
    }
    if (blob.bytes.size() != entry.at("bytes").get<std::size_t>() ||
        sha256_hex(blob.bytes) != entry.at("sha256").get<std::string>())
      throw IntegrityError("blob '" + name + "' of " + id +
                           " does not match its manifest hash");
    out.blobs.emplace(name, std::move(blob));
  }
  return out;
}

std::vector<ArtifactInfo> ArtifactStore::list(const std::string &kind) const {
  std::shared_lock lock(mutex_);
  std::vector<ArtifactInfo> out;
  for (const auto &[id, info] : index_)
    if (kind.empty() || info.kind == kind)
      out.push_back(info);
  std::sort(out.begin(), out.end(), [](const auto &a, const auto &b) {
    return std::tie(a.created_at, a.id) < std::tie(b.created_at, b.id);
  });
  return out;
}

} // namespace previs
