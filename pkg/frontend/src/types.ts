/** Payload shapes of the scoring service API. */

export type Score = 1 | 2 | 3 | 4 | 5 | 6 | 7 | 8 | 9 | 10;

export const ALL_SCORES: readonly Score[] = [1, 2, 3, 4, 5, 6, 7, 8, 9, 10];

export interface NextImage {
  image_id: string;
  pixels_url: string;
  n_ballots: number;
}

export interface BallotAck {
  n_ballots: number;
  qualified: boolean;
}

export interface Distribution {
  p: number[]; // 10 bin probabilities, scores 1..10
  n_ballots: number;
  mean: number;
  std: number;
  qualified: boolean;
}

export interface ApiErrorBody {
  code: string;
  message: string;
}
