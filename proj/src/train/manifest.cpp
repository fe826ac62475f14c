#include "glee/train/manifest.hpp"

#include <cstdlib>
#include <filesystem>
#include <fstream>
#include <set>
#include <sstream>

#include "glee/common/binary_io.hpp"
#include "glee/common/error.hpp"

namespace glee::train {

namespace fs = std::filesystem;

namespace {

const std::vector<std::string> kAuFields{"frame_id", "image", "landmarks", "subject", "labels"};
const std::vector<std::string> kTripletFields{"anchor_image",     "anchor_landmarks",
                                              "positive_image",   "positive_landmarks",
                                              "negative_image",   "negative_landmarks"};

std::vector<std::string> split_tabs(const std::string& line) {
  std::vector<std::string> out;
  std::size_t start = 0;
  while (true) {
    const std::size_t tab = line.find('\t', start);
    out.push_back(line.substr(start, tab - start));
    if (tab == std::string::npos) break;
    start = tab + 1;
  }
  return out;
}

struct Lines {
  std::vector<std::string> header;
  std::vector<std::pair<std::size_t, std::vector<std::string>>> rows;  // line number, fields
  std::vector<std::string> notes;
};

Lines read_lines(const std::string& path) {
  std::ifstream in(path);
  if (!in) throw ValidationError("cannot open manifest " + path);
  Lines out;
  std::string line;
  std::size_t number = 0;
  while (std::getline(in, line)) {
    ++number;
    if (!line.empty() && line.back() == '\r') line.pop_back();
    if (number == 1) {
      out.header = split_tabs(line);
      continue;
    }
    if (line.empty()) continue;
    if (line.front() == '#') {
      out.notes.push_back(line.substr(1));
      continue;
    }
    out.rows.emplace_back(number, split_tabs(line));
  }
  if (number == 0) throw ValidationError("manifest " + path + " is empty (no header)");
  return out;
}

std::string where(const std::string& path, std::size_t line) {
  return path + ":" + std::to_string(line);
}

void require_file(const std::string& p, const std::string& context) {
  if (!fs::exists(p)) throw ValidationError(context + ": missing file " + p);
}

std::string manifest_dir(const std::string& path) {
  const fs::path parent = fs::path(path).parent_path();
  return parent.empty() ? std::string(".") : parent.string();
}

void append_notes(std::ostringstream& os, const std::vector<std::string>& notes) {
  for (const std::string& n : notes) os << '#' << n << '\n';
}

std::string join(const std::vector<std::string>& fields) {
  std::string s;
  for (std::size_t i = 0; i < fields.size(); ++i) {
    if (i > 0) s += '\t';
    s += fields[i];
  }
  return s;
}

}  // namespace

std::string resolve_data_path(const std::string& path, const std::string& dir) {
  if (path.empty() || fs::path(path).is_absolute()) return path;
  if (const char* root = std::getenv("GLEE_DATA_ROOT"); root != nullptr && *root != '\0') {
    return (fs::path(root) / path).string();
  }
  return (fs::path(dir) / path).string();
}

void AUManifest::validate() const {
  if (au_count == 0) throw ValidationError("AU manifest: N_a must be at least 1");
  std::set<std::string> ids;
  for (const AURecord& r : records) {
    if (r.frame_id.empty()) throw ValidationError("AU manifest: empty frame_id");
    if (!ids.insert(r.frame_id).second) {
      throw ValidationError("AU manifest: duplicate frame_id " + r.frame_id);
    }
    if (r.subject_id.empty()) throw ValidationError("AU manifest: frame " + r.frame_id + " has no subject");
    if (r.labels.size() != au_count) {
      throw ValidationError("AU manifest: frame " + r.frame_id + " has " +
                            std::to_string(r.labels.size()) + " labels, expected " +
                            std::to_string(au_count));
    }
    for (int g : r.labels) {
      if (g != 0 && g != 1) throw ValidationError("AU manifest: frame " + r.frame_id + " label not 0/1");
    }
  }
}

AUManifest read_au_manifest(const std::string& path, bool check_files) {
  const Lines lines = read_lines(path);
  const std::vector<std::string>& h = lines.header;
  if (h.size() != kAuFields.size() + 1 ||
      !std::equal(kAuFields.begin(), kAuFields.end(), h.begin()) ||
      h.back().rfind("n_au=", 0) != 0) {
    throw ValidationError(path + ": header must be '" + join(kAuFields) + "\tn_au=<N>'");
  }
  AUManifest m;
  try {
    std::size_t used = 0;
    const long long n = std::stoll(h.back().substr(5), &used);
    if (used != h.back().size() - 5 || n <= 0) throw std::invalid_argument("n_au");
    m.au_count = static_cast<std::size_t>(n);
  } catch (const std::logic_error&) {
    throw ValidationError(path + ": bad N_a declaration '" + h.back() + "'");
  }
  m.notes = lines.notes;
  const std::string dir = manifest_dir(path);
  for (const auto& [number, f] : lines.rows) {
    if (f.size() != kAuFields.size()) {
      throw ValidationError(where(path, number) + ": expected " + std::to_string(kAuFields.size()) +
                            " fields, got " + std::to_string(f.size()));
    }
    AURecord r;
    r.frame_id = f[0];
    r.image_path = resolve_data_path(f[1], dir);
    r.landmark_path = resolve_data_path(f[2], dir);
    r.subject_id = f[3];
    for (char c : f[4]) {
      if (c != '0' && c != '1') {
        throw ValidationError(where(path, number) + ": labels must be 0/1 characters");
      }
      r.labels.push_back(c - '0');
    }
    if (r.labels.size() != m.au_count) {
      throw ValidationError(where(path, number) + ": " + std::to_string(r.labels.size()) +
                            " labels, header declares N_a = " + std::to_string(m.au_count));
    }
    if (check_files) {
      require_file(r.image_path, where(path, number));
      require_file(r.landmark_path, where(path, number));
    }
    m.records.push_back(std::move(r));
  }
  m.validate();
  return m;
}

void write_au_manifest(const std::string& path, const AUManifest& m) {
  m.validate();
  std::ostringstream os;
  os << join(kAuFields) << "\tn_au=" << m.au_count << '\n';
  append_notes(os, m.notes);
  for (const AURecord& r : m.records) {
    os << r.frame_id << '\t' << r.image_path << '\t' << r.landmark_path << '\t' << r.subject_id
       << '\t';
    for (int g : r.labels) os << g;
    os << '\n';
  }
  io::write_text_atomic(path, os.str());
}

TripletManifest read_triplet_manifest(const std::string& path, bool check_files) {
  const Lines lines = read_lines(path);
  if (lines.header != kTripletFields) {
    throw ValidationError(path + ": header must be '" + join(kTripletFields) + "'");
  }
  TripletManifest m;
  m.notes = lines.notes;
  const std::string dir = manifest_dir(path);
  for (const auto& [number, f] : lines.rows) {
    if (f.size() != kTripletFields.size()) {
      throw ValidationError(where(path, number) + ": expected 6 fields, got " +
                            std::to_string(f.size()));
    }
    std::vector<std::string> p;
    for (const std::string& s : f) p.push_back(resolve_data_path(s, dir));
    TripletRecord r{{p[0], p[1]}, {p[2], p[3]}, {p[4], p[5]}};
    if (r.anchor.image_path == r.positive.image_path ||
        r.anchor.image_path == r.negative.image_path ||
        r.positive.image_path == r.negative.image_path) {
      throw ValidationError(where(path, number) + ": triplet references the same image twice");
    }
    if (check_files) {
      for (const std::string& s : p) require_file(s, where(path, number));
    }
    m.records.push_back(std::move(r));
  }
  return m;
}

void write_triplet_manifest(const std::string& path, const TripletManifest& m) {
  std::ostringstream os;
  os << join(kTripletFields) << '\n';
  append_notes(os, m.notes);
  for (const TripletRecord& r : m.records) {
    os << r.anchor.image_path << '\t' << r.anchor.landmark_path << '\t' << r.positive.image_path
       << '\t' << r.positive.landmark_path << '\t' << r.negative.image_path << '\t'
       << r.negative.landmark_path << '\n';
  }
  io::write_text_atomic(path, os.str());
}

}  // namespace glee::train
