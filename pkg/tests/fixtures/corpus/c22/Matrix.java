public class Matrix {
    private int mRows;

    public int trace(int[] cells) {
        int total = 0;
        if (cells.length > 0) {
            int first = cells[0];
            total = mRows;
            <start>total += head;<end>
        }
        return total;
    }
}
