#pragma once

#include <Eigen/Core>
#include <string>
#include <vector>

namespace shadowmap::vision {

struct Frame {
    int width = 0;
    int height = 0;
    Eigen::MatrixXd pixels;  // height x width, intensities in [0,1]
};

struct ObjectLayout {
    int row_center = 0;       // vertical center of the fixed row band
    double range_min = 0.0;   // horizontal centers the unit state maps onto
    double range_max = 0.0;
};

// Objects are filled squares on fixed, disjoint row bands; the unit state
// moves each square's horizontal center affinely across its travel range,
// snapped to the nearest pixel (bounded observation noise <= half a pixel).
struct SceneLayout {
    int width = 64;
    int height = 64;
    int square_size = 8;
    std::vector<ObjectLayout> objects;

    static SceneLayout defaults(int n_objects);
    void validate() const;  // throws on overlaps or squares leaving the frame

    int band_top(int object) const {
        return objects[static_cast<std::size_t>(object)].row_center - square_size / 2;
    }
};

std::vector<Frame> render(const Eigen::MatrixXd& trajectory,
                          const SceneLayout& layout);

// Threshold at 0.5, find connected components, assign each to the object
// whose row band contains its centroid, invert the affine map. Throws
// (naming the frame index) if any frame has the wrong component count.
Eigen::MatrixXd extract_positions(const std::vector<Frame>& frames,
                                  const SceneLayout& layout);

// Binary PGM (P5, maxval 255).
void write_pgm(const std::string& path, const Frame& frame);
Frame read_pgm(const std::string& path);

// frame_000000.pgm, frame_000001.pgm, ... in `dir`.
void write_frames(const std::string& dir, const std::vector<Frame>& frames);
std::vector<Frame> read_frames(const std::string& dir);

} // namespace shadowmap::vision
