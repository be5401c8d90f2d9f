// Per-widget request sequencing: a response renders only if no newer request
// was issued for the same widget while it was in flight.

export class SequenceGate {
  private issued = 0;

  begin(): number {
    this.issued += 1;
    return this.issued;
  }

  accept(token: number): boolean {
    return token === this.issued;
  }
}
