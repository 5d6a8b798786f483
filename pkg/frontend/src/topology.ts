/**
 * Bundled district topology: polygon outlines keyed by 5-digit district
 * id. The demo set matches the sample graph shipped with the backend;
 * deployments swap in their own file with the same shape.
 */

export type Ring = Array<[number, number]>;

export interface DistrictShape {
  id: string;
  name: string;
  polygon: Ring;
}

export type Topology = Record<string, DistrictShape>;

export const DEMO_TOPOLOGY: Topology = {
  "01001": {
    id: "01001",
    name: "North",
    polygon: [
      [0, 6],
      [6, 6],
      [6, 10],
      [0, 10],
    ],
  },
  "02002": {
    id: "02002",
    name: "South",
    polygon: [
      [0, 0],
      [6, 0],
      [6, 4],
      [0, 4],
    ],
  },
  "03003": {
    id: "03003",
    name: "East",
    polygon: [
      [7, 3],
      [12, 3],
      [12, 8],
      [7, 8],
    ],
  },
  "04004": {
    id: "04004",
    name: "West",
    polygon: [
      [-6, 3],
      [-1, 3],
      [-1, 8],
      [-6, 8],
    ],
  },
};
