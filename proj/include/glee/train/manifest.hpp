#pragma once

// Tab-separated manifests. The first line names the fields; lines starting
// with '#' after it are notes.
//
// AU manifest header: frame_id image landmarks subject labels n_au=<N_a>
// where each record's labels field is N_a characters of '0' / '1'.
//
// Triplet manifest header: anchor_image anchor_landmarks positive_image
// positive_landmarks negative_image negative_landmarks
//
// Relative paths resolve against GLEE_DATA_ROOT when it is set, otherwise
// against the manifest's directory.

#include <string>
#include <vector>

namespace glee::train {

struct AURecord {
  std::string frame_id;
  std::string image_path;
  std::string landmark_path;
  std::string subject_id;
  std::vector<int> labels;
};

struct AUManifest {
  std::size_t au_count = 0;
  std::vector<AURecord> records;
  std::vector<std::string> notes;

  // Label lengths, binary labels, non-empty subjects, unique frame ids.
  void validate() const;
};

struct ImageRef {
  std::string image_path;
  std::string landmark_path;
};

struct TripletRecord {
  ImageRef anchor;
  ImageRef positive;
  ImageRef negative;
};

struct TripletManifest {
  std::vector<TripletRecord> records;
  std::vector<std::string> notes;
};

std::string resolve_data_path(const std::string& path, const std::string& manifest_dir);

// check_files: every referenced image and landmark file must exist.
AUManifest read_au_manifest(const std::string& path, bool check_files = true);
void write_au_manifest(const std::string& path, const AUManifest& manifest);

// Also rejects triplets that reference one image twice.
TripletManifest read_triplet_manifest(const std::string& path, bool check_files = true);
void write_triplet_manifest(const std::string& path, const TripletManifest& manifest);

}  // namespace glee::train
