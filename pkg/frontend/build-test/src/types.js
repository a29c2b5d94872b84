// Shapes mirroring the service's JSON API documents.
export {};
