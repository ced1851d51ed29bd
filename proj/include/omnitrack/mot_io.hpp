#pragma once

#include <cstdint>
#include <map>
#include <stdexcept>
#include <string>
#include <vector>

namespace omnitrack {

/// Raised on malformed MOT lines; carries the 1-based line number.
class FormatError : public std::runtime_error {
public:
    FormatError(const std::string& msg, std::size_t line_no)
        : std::runtime_error(msg + " (line " + std::to_string(line_no) + ")"),
          line_no_(line_no) {}
    std::size_t line_no() const { return line_no_; }

private:
    std::size_t line_no_;
};

class ValidationError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

class IoError : public std::runtime_error {
public:
    using std::runtime_error::runtime_error;
};

/// One 9-field MOT line: frame, id, left, top, width, height, conf, class, vis.
struct AnnotationRecord {
    int frame_id = 0;
    int track_id = -1;     // -1 marks a detection-only entry
    double left = 0.0;
    double top = 0.0;
    double width = 0.0;
    double height = 0.0;
    double confidence = 0.0;  // gt: consider flag 0/1; det: score in [0,1]
    int class_id = 0;         // 1 = person, 2 = car
    double visibility = 1.0;

    bool ignored = false;      // gt consider-flag 0
    bool below_min_area = false;

    double area() const { return width * height; }
    bool operator==(const AnnotationRecord&) const = default;
};

/// Key=value sidecar describing a sequence.
struct SequenceMeta {
    std::string name;
    int image_width = 0;
    int image_height = 0;
    double frame_rate = 0.0;
    int n_frames = 0;
    bool panoramic = false;
};

using FrameMap = std::map<int, std::vector<AnnotationRecord>>;

struct SequenceData {
    FrameMap gt;          // ordered by frame, then track_id
    FrameMap detections;  // ordered by frame, then descending confidence
};

/// Parses one MOT line. line_no is used for error reporting only.
AnnotationRecord parse_mot_line(const std::string& line, std::size_t line_no = 1);

/// Formats a record at 2-decimal precision (ids and class as integers).
std::string format_mot_line(const AnnotationRecord& r);

/// Loads one MOT file grouped by frame. gt selects gt-specific validation
/// (confidence flag, duplicate (frame, id) detection) and ordering.
FrameMap load_mot_file(const std::string& path, const SequenceMeta& meta,
                       bool is_gt, double min_box_area = 800.0);

SequenceData load_sequence(const std::string& gt_path, const std::string& det_path,
                           const SequenceMeta& meta, double min_box_area = 800.0);

/// Writes records as MOT lines sorted by frame then track_id.
void write_tracks(const FrameMap& tracks, const std::string& out_path);

SequenceMeta parse_meta_text(const std::string& text);
SequenceMeta load_meta_file(const std::string& path);
void write_meta_file(const SequenceMeta& meta, const std::string& path);

}  // namespace omnitrack
