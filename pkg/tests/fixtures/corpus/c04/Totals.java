public class Totals {
    public int sum(int a, int b) {
        int used = a;
        int fresh = b;
        int other = used * 2;
        <start>return other + value;<end>
    }
}
