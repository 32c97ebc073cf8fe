/** Rater identity: a random opaque token kept in session storage. */

const STORAGE_KEY = "ruralhq_rater_id";

export function randomToken(): string {
  const bytes = new Uint8Array(12);
  crypto.getRandomValues(bytes);
  return Array.from(bytes, (b) => b.toString(16).padStart(2, "0")).join("");
}

export function getRaterId(storage: Storage = sessionStorage): string {
  let token = storage.getItem(STORAGE_KEY);
  if (!token) {
    token = randomToken();
    storage.setItem(STORAGE_KEY, token);
  }
  return token;
}
