#pragma once

#include <string>

// Skeleton JSON fixtures shared by the unit and acceptance tests.
namespace fixtures {

// Single unit square in the xy-plane, clamped along y = 1.
inline std::string square_json(bool clamped = true) {
    std::string c = clamped ? "true" : "false";
    return R"({
  "eta0": 2.0, "delta0": 0.25,
  "faces": [
    {"id": 0, "vertices": [[0,0,0],[1,0,0],[1,1,0],[0,1,0]],
     "origin": [0,0,0], "e1": [1,0,0], "e2": [0,1,0]}
  ],
  "edges": [
    {"a": [0,0,0], "b": [1,0,0], "faces": [0], "clamped": false},
    {"a": [1,0,0], "b": [1,1,0], "faces": [0], "clamped": false},
    {"a": [1,1,0], "b": [0,1,0], "faces": [0], "clamped": )" +
           c + R"(},
    {"a": [0,1,0], "b": [0,0,0], "faces": [0], "clamped": false}
  ]
})";
}

// Unit square clamped on all four sides.
inline std::string square_all_clamped_json() {
    return R"({
  "eta0": 2.0, "delta0": 0.25,
  "faces": [
    {"id": 0, "vertices": [[0,0,0],[1,0,0],[1,1,0],[0,1,0]],
     "origin": [0,0,0], "e1": [1,0,0], "e2": [0,1,0]}
  ],
  "edges": [
    {"a": [0,0,0], "b": [1,0,0], "faces": [0], "clamped": true},
    {"a": [1,0,0], "b": [1,1,0], "faces": [0], "clamped": true},
    {"a": [1,1,0], "b": [0,1,0], "faces": [0], "clamped": true},
    {"a": [0,1,0], "b": [0,0,0], "faces": [0], "clamped": true}
  ]
})";
}

// Two unit squares meeting at a right angle along the x-axis. Face 0 lies in the
// xy-plane and is clamped along its far edge y = 1; face 1 stands in the xz-plane.
inline std::string right_angle_json() {
    return R"({
  "eta0": 2.0, "delta0": 0.25,
  "faces": [
    {"id": 0, "vertices": [[0,0,0],[1,0,0],[1,1,0],[0,1,0]],
     "origin": [0,0,0], "e1": [1,0,0], "e2": [0,1,0]},
    {"id": 1, "vertices": [[0,0,0],[1,0,0],[1,0,1],[0,0,1]],
     "origin": [0,0,0], "e1": [1,0,0], "e2": [0,0,1]}
  ],
  "edges": [
    {"a": [0,0,0], "b": [1,0,0], "faces": [0,1], "clamped": false},
    {"a": [1,0,0], "b": [1,1,0], "faces": [0], "clamped": false},
    {"a": [1,1,0], "b": [0,1,0], "faces": [0], "clamped": true},
    {"a": [0,1,0], "b": [0,0,0], "faces": [0], "clamped": false},
    {"a": [1,0,0], "b": [1,0,1], "faces": [1], "clamped": false},
    {"a": [1,0,1], "b": [0,0,1], "faces": [1], "clamped": false},
    {"a": [0,0,1], "b": [0,0,0], "faces": [1], "clamped": false}
  ]
})";
}

// Two coplanar unit squares sharing the edge x = 1, clamped along x = 0.
inline std::string coplanar_pair_json() {
    return R"({
  "eta0": 2.0, "delta0": 0.25,
  "faces": [
    {"id": 0, "vertices": [[0,0,0],[1,0,0],[1,1,0],[0,1,0]],
     "origin": [0,0,0], "e1": [1,0,0], "e2": [0,1,0]},
    {"id": 1, "vertices": [[1,0,0],[2,0,0],[2,1,0],[1,1,0]],
     "origin": [1,0,0], "e1": [1,0,0], "e2": [0,1,0]}
  ],
  "edges": [
    {"a": [1,0,0], "b": [1,1,0], "faces": [0,1], "clamped": false},
    {"a": [0,0,0], "b": [1,0,0], "faces": [0], "clamped": false},
    {"a": [1,1,0], "b": [0,1,0], "faces": [0], "clamped": false},
    {"a": [0,1,0], "b": [0,0,0], "faces": [0], "clamped": true},
    {"a": [1,0,0], "b": [2,0,0], "faces": [1], "clamped": false},
    {"a": [2,0,0], "b": [2,1,0], "faces": [1], "clamped": false},
    {"a": [2,1,0], "b": [1,1,0], "faces": [1], "clamped": false}
  ]
})";
}

// Three faces sharing the x-axis edge: xy-plane, upper xz, lower xz.
inline std::string t_junction_json() {
    return R"({
  "eta0": 2.0, "delta0": 0.25,
  "faces": [
    {"id": 0, "vertices": [[0,0,0],[1,0,0],[1,1,0],[0,1,0]],
     "origin": [0,0,0], "e1": [1,0,0], "e2": [0,1,0]},
    {"id": 1, "vertices": [[0,0,0],[1,0,0],[1,0,1],[0,0,1]],
     "origin": [0,0,0], "e1": [1,0,0], "e2": [0,0,1]},
    {"id": 2, "vertices": [[0,0,0],[1,0,0],[1,0,-1],[0,0,-1]],
     "origin": [0,0,0], "e1": [1,0,0], "e2": [0,0,-1]}
  ],
  "edges": [
    {"a": [0,0,0], "b": [1,0,0], "faces": [0,1,2], "clamped": false},
    {"a": [1,0,0], "b": [1,1,0], "faces": [0], "clamped": false},
    {"a": [1,1,0], "b": [0,1,0], "faces": [0], "clamped": true},
    {"a": [0,1,0], "b": [0,0,0], "faces": [0], "clamped": false},
    {"a": [1,0,0], "b": [1,0,1], "faces": [1], "clamped": false},
    {"a": [1,0,1], "b": [0,0,1], "faces": [1], "clamped": false},
    {"a": [0,0,1], "b": [0,0,0], "faces": [1], "clamped": false},
    {"a": [1,0,0], "b": [1,0,-1], "faces": [2], "clamped": false},
    {"a": [1,0,-1], "b": [0,0,-1], "faces": [2], "clamped": false},
    {"a": [0,0,-1], "b": [0,0,0], "faces": [2], "clamped": false}
  ]
})";
}

// Three mutually orthogonal unit squares meeting pairwise along the coordinate
// axes, all three incident to the origin vertex. Clamped along y = 1 on face 0.
inline std::string box_corner_json() {
    return R"({
  "eta0": 2.0, "delta0": 0.25,
  "faces": [
    {"id": 0, "vertices": [[0,0,0],[1,0,0],[1,1,0],[0,1,0]],
     "origin": [0,0,0], "e1": [1,0,0], "e2": [0,1,0]},
    {"id": 1, "vertices": [[0,0,0],[1,0,0],[1,0,1],[0,0,1]],
     "origin": [0,0,0], "e1": [1,0,0], "e2": [0,0,1]},
    {"id": 2, "vertices": [[0,0,0],[0,1,0],[0,1,1],[0,0,1]],
     "origin": [0,0,0], "e1": [0,1,0], "e2": [0,0,1]}
  ],
  "edges": [
    {"a": [0,0,0], "b": [1,0,0], "faces": [0,1], "clamped": false},
    {"a": [0,0,0], "b": [0,1,0], "faces": [0,2], "clamped": false},
    {"a": [0,0,0], "b": [0,0,1], "faces": [1,2], "clamped": false},
    {"a": [1,0,0], "b": [1,1,0], "faces": [0], "clamped": false},
    {"a": [1,1,0], "b": [0,1,0], "faces": [0], "clamped": true},
    {"a": [0,1,0], "b": [0,1,1], "faces": [2], "clamped": false},
    {"a": [0,1,1], "b": [0,0,1], "faces": [2], "clamped": false},
    {"a": [1,0,0], "b": [1,0,1], "faces": [1], "clamped": false},
    {"a": [1,0,1], "b": [0,0,1], "faces": [1], "clamped": false}
  ]
})";
}

// Two squares touching only at the corner (1,1,0): the vertex fan is disconnected.
inline std::string vertex_touch_json() {
    return R"({
  "eta0": 2.0, "delta0": 0.25,
  "faces": [
    {"id": 0, "vertices": [[0,0,0],[1,0,0],[1,1,0],[0,1,0]],
     "origin": [0,0,0], "e1": [1,0,0], "e2": [0,1,0]},
    {"id": 1, "vertices": [[1,1,0],[2,1,0],[2,2,0],[1,2,0]],
     "origin": [1,1,0], "e1": [1,0,0], "e2": [0,1,0]}
  ],
  "edges": [
    {"a": [0,0,0], "b": [1,0,0], "faces": [0], "clamped": true},
    {"a": [1,0,0], "b": [1,1,0], "faces": [0], "clamped": false},
    {"a": [1,1,0], "b": [0,1,0], "faces": [0], "clamped": false},
    {"a": [0,1,0], "b": [0,0,0], "faces": [0], "clamped": false},
    {"a": [1,1,0], "b": [2,1,0], "faces": [1], "clamped": false},
    {"a": [2,1,0], "b": [2,2,0], "faces": [1], "clamped": false},
    {"a": [2,2,0], "b": [1,2,0], "faces": [1], "clamped": false},
    {"a": [1,2,0], "b": [1,1,0], "faces": [1], "clamped": false}
  ]
})";
}

// Face declared with a frame it does not lie in.
inline std::string non_planar_json() {
    return R"({
  "faces": [
    {"id": 0, "vertices": [[0,0,0],[1,0,0],[1,1,0.3],[0,1,0]],
     "origin": [0,0,0], "e1": [1,0,0], "e2": [0,1,0]}
  ],
  "edges": [
    {"a": [0,0,0], "b": [1,0,0], "faces": [0], "clamped": true}
  ]
})";
}

}  // namespace fixtures
