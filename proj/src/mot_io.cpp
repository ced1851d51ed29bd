#include "omnitrack/mot_io.hpp"

#include <algorithm>
#include <cctype>
#include <charconv>
#include <cmath>
#include <cstdio>
#include <fstream>
#include <set>
#include <sstream>

namespace omnitrack {

namespace {

std::vector<std::string> split_csv(const std::string& line) {
    std::vector<std::string> out;
    std::string cur;
    for (char c : line) {
        if (c == ',') {
            out.push_back(cur);
            cur.clear();
        } else {
            cur.push_back(c);
        }
    }
    out.push_back(cur);
    return out;
}

std::string trim(const std::string& s) {
    std::size_t b = 0, e = s.size();
    while (b < e && std::isspace(static_cast<unsigned char>(s[b]))) ++b;
    while (e > b && std::isspace(static_cast<unsigned char>(s[e - 1]))) --e;
    return s.substr(b, e - b);
}

double parse_double(const std::string& field, std::size_t line_no) {
    const std::string t = trim(field);
    if (t.empty()) throw FormatError("empty field", line_no);
    std::size_t pos = 0;
    double v;
    try {
        v = std::stod(t, &pos);
    } catch (const std::exception&) {
        throw FormatError("non-numeric field '" + t + "'", line_no);
    }
    if (pos != t.size())
        throw FormatError("trailing garbage in field '" + t + "'", line_no);
    return v;
}

int parse_int(const std::string& field, std::size_t line_no) {
    const double v = parse_double(field, line_no);
    if (v != std::floor(v))
        throw FormatError("expected integer field, got '" + trim(field) + "'", line_no);
    return static_cast<int>(v);
}

}  // namespace

AnnotationRecord parse_mot_line(const std::string& line, std::size_t line_no) {
    const auto fields = split_csv(line);
    if (fields.size() != 9)
        throw FormatError("expected 9 fields, got " + std::to_string(fields.size()),
                          line_no);

    AnnotationRecord r;
    r.frame_id = parse_int(fields[0], line_no);
    r.track_id = parse_int(fields[1], line_no);
    r.left = parse_double(fields[2], line_no);
    r.top = parse_double(fields[3], line_no);
    r.width = parse_double(fields[4], line_no);
    r.height = parse_double(fields[5], line_no);
    r.confidence = parse_double(fields[6], line_no);
    r.class_id = parse_int(fields[7], line_no);
    r.visibility = parse_double(fields[8], line_no);

    if (r.frame_id <= 0)
        throw ValidationError("frame_id must be positive");
    if (r.width <= 0.0 || r.height <= 0.0)
        throw ValidationError("box extent must be positive (line " +
                              std::to_string(line_no) + ")");
    if (r.visibility < 0.0 || r.visibility > 1.0)
        throw ValidationError("visibility outside [0,1] (line " +
                              std::to_string(line_no) + ")");
    return r;
}

std::string format_mot_line(const AnnotationRecord& r) {
    char buf[160];
    std::snprintf(buf, sizeof(buf), "%d,%d,%.2f,%.2f,%.2f,%.2f,%.2f,%d,%.2f",
                  r.frame_id, r.track_id, r.left, r.top, r.width, r.height,
                  r.confidence, r.class_id, r.visibility);
    return buf;
}

FrameMap load_mot_file(const std::string& path, const SequenceMeta& meta,
                       bool is_gt, double min_box_area) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);

    FrameMap frames;
    std::set<std::pair<int, int>> seen;  // (frame, track_id), gt only
    std::string line;
    std::size_t line_no = 0;
    while (std::getline(in, line)) {
        ++line_no;
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        AnnotationRecord r = parse_mot_line(t, line_no);

        if (meta.n_frames > 0 && r.frame_id > meta.n_frames)
            throw ValidationError(path + ": frame " + std::to_string(r.frame_id) +
                                  " beyond sequence length " +
                                  std::to_string(meta.n_frames));
        if (is_gt) {
            if (r.confidence != 0.0 && r.confidence != 1.0)
                throw ValidationError(path + ": gt confidence flag must be 0 or 1 (line " +
                                      std::to_string(line_no) + ")");
            r.ignored = (r.confidence == 0.0);
            if (!seen.insert({r.frame_id, r.track_id}).second)
                throw ValidationError(path + ": duplicate identity (frame " +
                                      std::to_string(r.frame_id) + ", id " +
                                      std::to_string(r.track_id) + ")");
        }
        r.below_min_area = r.area() < min_box_area;
        frames[r.frame_id].push_back(r);
    }

    for (auto& [frame, recs] : frames) {
        if (is_gt) {
            std::stable_sort(recs.begin(), recs.end(),
                             [](const AnnotationRecord& a, const AnnotationRecord& b) {
                                 return a.track_id < b.track_id;
                             });
        } else {
            std::stable_sort(recs.begin(), recs.end(),
                             [](const AnnotationRecord& a, const AnnotationRecord& b) {
                                 return a.confidence > b.confidence;
                             });
        }
    }
    return frames;
}

SequenceData load_sequence(const std::string& gt_path, const std::string& det_path,
                           const SequenceMeta& meta, double min_box_area) {
    SequenceData d;
    d.gt = load_mot_file(gt_path, meta, /*is_gt=*/true, min_box_area);
    d.detections = load_mot_file(det_path, meta, /*is_gt=*/false, min_box_area);
    return d;
}

void write_tracks(const FrameMap& tracks, const std::string& out_path) {
    std::ofstream out(out_path);
    if (!out) throw IoError("cannot write " + out_path);
    for (const auto& [frame, recs] : tracks) {
        std::vector<AnnotationRecord> sorted = recs;
        std::stable_sort(sorted.begin(), sorted.end(),
                         [](const AnnotationRecord& a, const AnnotationRecord& b) {
                             return a.track_id < b.track_id;
                         });
        for (const AnnotationRecord& r : sorted) {
            if (r.width <= 0.0 || r.height <= 0.0)
                throw ValidationError("refusing to emit box with non-positive extent");
            out << format_mot_line(r) << '\n';
        }
    }
    if (!out) throw IoError("write failed for " + out_path);
}

SequenceMeta parse_meta_text(const std::string& text) {
    SequenceMeta m;
    std::istringstream in(text);
    std::string line;
    while (std::getline(in, line)) {
        const std::string t = trim(line);
        if (t.empty() || t[0] == '#') continue;
        const auto eq = t.find('=');
        if (eq == std::string::npos)
            throw ValidationError("meta line missing '=': " + t);
        const std::string key = trim(t.substr(0, eq));
        const std::string val = trim(t.substr(eq + 1));
        if (key == "name") m.name = val;
        else if (key == "width") m.image_width = std::stoi(val);
        else if (key == "height") m.image_height = std::stoi(val);
        else if (key == "fps") m.frame_rate = std::stod(val);
        else if (key == "frames") m.n_frames = std::stoi(val);
        else if (key == "panoramic") m.panoramic = (val == "1" || val == "true" || val == "on");
        else throw ValidationError("unknown meta key: " + key);
    }
    if (m.image_width <= 0) throw ValidationError("meta: width must be positive");
    if (m.n_frames <= 0) throw ValidationError("meta: frames must be positive");
    return m;
}

SequenceMeta load_meta_file(const std::string& path) {
    std::ifstream in(path);
    if (!in) throw IoError("cannot open " + path);
    std::stringstream ss;
    ss << in.rdbuf();
    return parse_meta_text(ss.str());
}

void write_meta_file(const SequenceMeta& meta, const std::string& path) {
    std::ofstream out(path);
    if (!out) throw IoError("cannot write " + path);
    out << "name=" << meta.name << '\n'
        << "width=" << meta.image_width << '\n'
        << "height=" << meta.image_height << '\n'
        << "fps=" << meta.frame_rate << '\n'
        << "frames=" << meta.n_frames << '\n'
        << "panoramic=" << (meta.panoramic ? 1 : 0) << '\n';
}

}  // namespace omnitrack
